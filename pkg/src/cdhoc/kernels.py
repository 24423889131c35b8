"""Backend selection for the hot loops.

The compiled extension ``cdhoc._ckernels`` is used when it was built;
otherwise the numpy fallback in ``cdhoc._pykernels`` is used. Setting
``CDHOC_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels as fallback

try:
    from . import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

if compiled is not None and os.environ.get("CDHOC_PURE_PYTHON", "") in ("", "0"):
    _impl = compiled
    BACKEND = "cython"
else:
    _impl = fallback
    BACKEND = "python"

dtw = _impl.dtw
loess = _impl.loess
linear_recursion = _impl.linear_recursion
svr_epoch = _impl.svr_epoch

__all__ = ["BACKEND", "compiled", "fallback", "dtw", "loess", "linear_recursion", "svr_epoch"]
