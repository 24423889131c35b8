"""Linear epsilon-insensitive support vector regression baseline.

Occupancy at ``t`` is regressed on the CO2 window ``C[t+lag-window+1 .. t+lag]``
(same lag convention as :func:`cdhoc.series.shift_and_trim`). Training
minimises ``c * sum(max(0, |y - w.x - b| - epsilon)) + 0.5 * |w|^2`` by seeded
stochastic subgradient descent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NoVarianceError, ValidationError
from .series import SampledSeries, Unit


@dataclass(frozen=True, eq=False)
class SvrModel:
    weights: np.ndarray
    bias: float
    epsilon: float
    c: float
    lag: int
    window: int
    mean: np.ndarray
    scale: np.ndarray
    objective_history: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValidationError("epsilon must be >= 0")
        if self.c <= 0:
            raise ValidationError("c must be > 0")
        if self.window < 1 or self.lag < 0:
            raise ValidationError("window must be >= 1 and lag >= 0")
        params = np.concatenate([self.weights, [self.bias], self.mean, self.scale])
        if not np.all(np.isfinite(params)):
            raise ValidationError("SVR parameters must be finite")

    def features(self, co2) -> np.ndarray:
        return (lag_matrix(co2, self.window) - self.mean) / self.scale

    def decision(self, features: np.ndarray) -> np.ndarray:
        return features @ self.weights + self.bias


def lag_matrix(values, window: int) -> np.ndarray:
    """Row ``k`` holds ``values[k + window - 1], ..., values[k]`` (newest first)."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < window:
        raise ValidationError(f"need at least {window} samples for the feature window")
    cols = [v[window - 1 - j: len(v) - j] for j in range(window)]
    return np.ascontiguousarray(np.column_stack(cols))


def _design(co2: SampledSeries, occ: SampledSeries, lag: int, window: int):
    """Features and targets for every occupancy index with a full CO2 window."""
    if co2.interval != occ.interval or co2.start_time != occ.start_time:
        raise ValidationError("CO2 and occupancy must share start time and interval")
    co2.require_complete()
    occ.require_complete()
    t0 = max(0, window - 1 - lag)
    t1 = min(len(occ), len(co2) - lag)
    if t1 - t0 <= window:
        raise ValidationError("aligned data shorter than the feature window")
    X = lag_matrix(co2.values[t0 + lag - window + 1: t1 + lag], window)
    return X, np.ascontiguousarray(occ.values[t0:t1])


def objective(w, b, X, y, epsilon, c) -> float:
    resid = np.abs(y - (X @ w + b))
    return float(c * np.maximum(0.0, resid - epsilon).sum() + 0.5 * (w @ w))


def fit_svr(co2: SampledSeries, occ: SampledSeries, lag: int = 0, window: int = 4,
            epsilon: float = 0.5, c: float = 1.0, epochs: int = 30, seed: int = 0,
            eta: float = 0.01) -> SvrModel:
    """Fit the baseline.

    Each epoch visits the samples in a seeded random order with step
    ``eta / sqrt(1 + k)``. Alongside the raw iterate a running average of all
    iterates is kept, restarted at epochs 1, 2, 4, 8, ... so that it forgets
    the early transient. At every epoch boundary the model keeps whichever of
    the previous model, the iterate and the average has the lowest full-data
    objective, so the recorded objective never increases.
    """
    if epochs < 1:
        raise ValidationError("epochs must be >= 1")
    if epsilon < 0 or c <= 0 or eta <= 0:
        raise ValidationError("need epsilon >= 0, c > 0 and eta > 0")
    X, y = _design(co2, occ, lag, window)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    if np.any(scale == 0.0):
        raise NoVarianceError("a CO2 feature column has zero variance; cannot normalise", stage="svr")
    Z = np.ascontiguousarray((X - mean) / scale)
    n, d = Z.shape
    rng = np.random.default_rng(seed)
    w_it = np.zeros(d)
    b_it = float(np.median(y))
    w, b = w_it.copy(), b_it
    best = objective(w, b, Z, y, epsilon, c)
    history = [best]
    reg = 1.0 / n  # spreads the 0.5|w|^2 term evenly over the n per-sample steps
    acc = np.zeros(d + 1)
    steps = 0
    for k in range(epochs):
        if (k & (k - 1)) == 0:
            acc[:] = 0.0
            steps = 0
        order = rng.permutation(n).astype(np.int64)
        b_it = kernels.svr_epoch(Z, y, w_it, b_it, order, eta / np.sqrt(1.0 + k), epsilon, c, reg, acc)
        steps += n
        w_avg, b_avg = acc[:d] / steps, float(acc[d] / steps)
        for w_c, b_c in ((w_it, float(b_it)), (w_avg, b_avg)):
            value = objective(w_c, b_c, Z, y, epsilon, c)
            if value <= best:
                w, b, best = w_c.copy(), b_c, value
        history.append(best)
    return SvrModel(w, b, float(epsilon), float(c), int(lag), int(window), mean, scale, tuple(history))


def predict_svr(model: SvrModel, co2: SampledSeries) -> SampledSeries:
    """Whole-person predictions for every occupancy time with a full CO2 window.

    The result starts at ``co2.start_time + max(0, window - 1 - lag) * interval``
    and ends ``lag`` samples before the end of ``co2``.
    """
    co2.require_complete()
    t0 = max(0, model.window - 1 - model.lag)
    t1 = len(co2) - model.lag
    if t1 - t0 < 1:
        raise ValidationError("insufficient CO2 history for the feature window and lag")
    raw = model.decision(model.features(co2.values[t0 + model.lag - model.window + 1: t1 + model.lag]))
    out = np.rint(np.maximum(0.0, raw))
    return SampledSeries(co2.start_time + t0 * co2.interval, co2.interval, out, Unit.PERSONS)
