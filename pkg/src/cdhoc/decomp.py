"""Additive seasonal-trend decomposition: moving-average (STD) and loess (STL)."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import DegenerateNeighborhoodError, ValidationError
from .series import SampledSeries, Unit

HENDERSON_TERMS = (5, 9, 13, 23)


class Method(str, enum.Enum):
    STD = "STD"
    STL = "STL"


@dataclass(frozen=True, eq=False)
class ComponentSet:
    trend: SampledSeries
    seasonal: SampledSeries
    irregular: SampledSeries
    period: int
    method: Method

    def __post_init__(self):
        ref = self.trend
        for comp in (self.seasonal, self.irregular):
            if len(comp) != len(ref) or comp.interval != ref.interval or comp.start_time != ref.start_time:
                raise ValidationError("components must share length, interval and start time")

    def __len__(self):
        return len(self.trend)

    def total(self) -> np.ndarray:
        return self.trend.values + self.seasonal.values + self.irregular.values

    def slice(self, start: int, stop: int) -> "ComponentSet":
        return ComponentSet(self.trend.slice(start, stop), self.seasonal.slice(start, stop),
                            self.irregular.slice(start, stop), self.period, self.method)

    def rows(self):
        """``(t, trend, seasonal, irregular)`` tuples for plot export."""
        return zip(self.trend.times, self.trend.values, self.seasonal.values, self.irregular.values)


def _next_odd(x: float) -> int:
    n = math.ceil(x)
    return n if n % 2 else n + 1


@dataclass(frozen=True)
class StlParams:
    period: int
    seasonal_span: int = 7
    trend_span: Optional[int] = None
    lowpass_span: Optional[int] = None
    inner_iterations: int = 2
    outer_iterations: int = 1
    loess_degree: int = 1

    def __post_init__(self):
        if self.period < 2:
            raise ValidationError("period must be >= 2")
        if self.trend_span is None:
            object.__setattr__(self, "trend_span",
                               _next_odd(1.5 * self.period / (1.0 - 1.5 / self.seasonal_span)))
        if self.lowpass_span is None:
            object.__setattr__(self, "lowpass_span", _next_odd(self.period))
        for name in ("seasonal_span", "trend_span", "lowpass_span"):
            v = getattr(self, name)
            if v < 3 or v % 2 == 0:
                raise ValidationError(f"{name} must be odd and >= 3, got {v}")
        if self.inner_iterations < 1 or self.outer_iterations < 0:
            raise ValidationError("need inner_iterations >= 1 and outer_iterations >= 0")
        if self.loess_degree not in (1, 2):
            raise ValidationError("loess_degree must be 1 or 2")


# -- moving averages ---------------------------------------------------------

def ma_weights(m: int, n: int) -> np.ndarray:
    """Weights of an n-term mean followed by an m-term mean."""
    w = np.convolve(np.full(m, 1.0 / m), np.full(n, 1.0 / n))
    if len(w) % 2 == 0:
        raise ValidationError(f"{m}x{n} moving average has no centre (even length {len(w)})")
    return w


def symmetric_filter(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Centred filter; near the ends the window shrinks symmetrically and is renormalised."""
    half = len(weights) // 2
    n = len(values)
    out = np.empty(n)
    if n > 2 * half:
        out[half:n - half] = np.convolve(values, weights[::-1], mode="valid")
    for i in list(range(min(half, n))) + list(range(max(half, n - half), n)):
        h = min(i, n - 1 - i, half)
        w = weights[half - h:half + h + 1]
        out[i] = np.dot(w, values[i - h:i + h + 1]) / w.sum()
    return out


def asymmetric_filter(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Centred filter; near the ends the missing side is dropped and the rest renormalised."""
    half = len(weights) // 2
    n = len(values)
    out = np.empty(n)
    if n > 2 * half:
        out[half:n - half] = np.convolve(values, weights[::-1], mode="valid")
    for i in list(range(min(half, n))) + list(range(max(half, n - half), n)):
        a = min(i, half)
        b = min(n - 1 - i, half)
        w = weights[half - a:half + b + 1]
        out[i] = np.dot(w, values[i - a:i + b + 1]) / w.sum()
    return out


def moving_average(series: SampledSeries, m: int, n: int) -> SampledSeries:
    """Centred m-by-n moving average of the same length as ``series``."""
    series.require_complete()
    if len(series) <= m + n:
        raise ValidationError(f"series of length {len(series)} too short for a {m}x{n} moving average")
    return series.with_values(symmetric_filter(series.values, ma_weights(m, n)), unit=_component_unit(series))


def henderson_weights(terms: int) -> np.ndarray:
    """Weights minimising the summed squared third differences subject to
    reproducing cubics, found by solving the constrained least-squares system."""
    if terms not in HENDERSON_TERMS:
        raise ValidationError(f"Henderson filter length must be one of {HENDERSON_TERMS}")
    p = terms // 2
    j = np.arange(-p, p + 1, dtype=np.float64)
    # third-difference operator over the zero-padded weight vector
    d = np.zeros((terms + 3, terms))
    for row in range(terms + 3):
        for k, c in enumerate((1.0, -3.0, 3.0, -1.0)):
            col = row - k
            if 0 <= col < terms:
                d[row, col] = c
    a = np.vstack([j**r for r in range(4)])
    kkt = np.zeros((terms + 4, terms + 4))
    kkt[:terms, :terms] = 2.0 * d.T @ d
    kkt[:terms, terms:] = a.T
    kkt[terms:, :terms] = a
    rhs = np.zeros(terms + 4)
    rhs[terms] = 1.0
    return np.linalg.solve(kkt, rhs)[:terms]


def henderson(series: SampledSeries, terms: int = 13) -> SampledSeries:
    series.require_complete()
    w = henderson_weights(terms)
    if len(series) <= terms:
        raise ValidationError(f"series of length {len(series)} too short for a {terms}-term Henderson filter")
    return series.with_values(asymmetric_filter(series.values, w), unit=_component_unit(series))


def _component_unit(series: SampledSeries) -> Unit:
    # components of a count series can be negative
    return Unit.DIMENSIONLESS if series.unit is Unit.PERSONS else series.unit


# -- STD -----------------------------------------------------------------------

_W3x3 = ma_weights(3, 3)
_W3x5 = ma_weights(3, 5)


def _per_phase(values: np.ndarray, period: int, weights: np.ndarray) -> np.ndarray:
    out = np.empty_like(values)
    for j in range(period):
        out[j::period] = asymmetric_filter(values[j::period], weights)
    return out


def _centre(seasonal: np.ndarray, period: int) -> np.ndarray:
    """Remove each complete cycle's mean (cycles counted from the first sample);
    a trailing partial cycle uses the mean of the last full period."""
    n = len(seasonal)
    full = n // period
    out = seasonal.copy()
    blocks = out[:full * period].reshape(full, period)
    blocks -= blocks.mean(axis=1, keepdims=True)
    if n > full * period:
        out[full * period:] -= seasonal[n - period:].mean()
    return out


def _seasonal_pass(detrended: np.ndarray, period: int, weights: np.ndarray) -> np.ndarray:
    # no extreme-value replacement, so a single smoothing pass suffices
    return _centre(_per_phase(detrended, period, weights), period)


def decompose_std(series: SampledSeries, period: int, henderson_terms: int = 13) -> ComponentSet:
    """Moving-average decomposition in additive form.

    Rough trend by a centred 2-by-period average (1-by-period for odd periods),
    seasonal from 3x3 per-phase averages of the detrended values, Henderson
    trend of the seasonally adjusted series, then a second seasonal pass with
    3x5 per-phase averages. The irregular part is the residual.
    """
    series.require_complete()
    y = series.values
    n = len(y)
    if period < 2:
        raise ValidationError("period must be >= 2")
    if n < 3 * period:
        raise ValidationError(f"series of length {n} shorter than three periods of {period}")
    rough = moving_average(series, 2 if period % 2 == 0 else 1, period).values
    s1 = _seasonal_pass(y - rough, period, _W3x3)
    adjusted = series.with_values(y - s1, unit=_component_unit(series))
    trend = henderson(adjusted, henderson_terms).values
    s2 = _seasonal_pass(y - trend, period, _W3x5)
    return _component_set(series, trend, s2, period, Method.STD)


def _component_set(series, trend, seasonal, period, method) -> ComponentSet:
    unit = _component_unit(series)
    irregular = series.values - trend - seasonal
    mk = lambda v: SampledSeries(series.start_time, series.interval, v, unit)  # noqa: E731
    return ComponentSet(mk(trend), mk(seasonal), mk(irregular), period, method)


# -- loess / STL ----------------------------------------------------------------

def _loess_at(xs, ys, x_eval, span, degree, rw):
    fitted, ok = kernels.loess(xs, ys, x_eval, int(span), int(degree), rw)
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise DegenerateNeighborhoodError(
            f"local fit at x={x_eval[bad]:g} is singular (too few positively weighted points)",
            stage="loess")
    return fitted


def _robust_loess_at(xs, ys, x_eval, span, degree, rw):
    """Like ``_loess_at``, but a point whose robustness weights leave the local
    fit singular is refitted over a doubled neighbourhood, repeatedly, keeping
    the weights so that rejected outliers stay rejected. Only when every point
    is rejected does it fall back to distance weights alone."""
    fitted, ok = kernels.loess(xs, ys, x_eval, int(span), int(degree), rw)
    wide = int(span)
    while not ok.all() and wide < len(xs):
        wide = min(2 * wide, len(xs))
        redo = np.ascontiguousarray(x_eval[~ok])
        refit, now_ok = kernels.loess(xs, ys, redo, wide, int(degree), rw)
        idx = np.flatnonzero(~ok)
        fitted[idx[now_ok]] = refit[now_ok]
        ok[idx[now_ok]] = True
    if not ok.all():
        redo = np.ascontiguousarray(x_eval[~ok])
        fitted[~ok] = _loess_at(xs, ys, redo, span, degree, np.ones_like(rw))
    return fitted


def loess(xs, ys, span: int, degree: int = 1, robustness_weights=None) -> np.ndarray:
    """Locally weighted regression evaluated at every ``xs``.

    Each fit uses the ``span`` nearest neighbours with tricube weights scaled
    by the distance to the farthest of them (so that point gets weight 0).
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValidationError("xs and ys must be 1-d and of equal length")
    if degree not in (1, 2):
        raise ValidationError("degree must be 1 or 2")
    if span < degree + 2:
        raise ValidationError(f"span must be >= degree + 2 = {degree + 2}")
    if len(xs) > 1 and np.any(np.diff(xs) <= 0):
        raise ValidationError("xs must be strictly increasing")
    if robustness_weights is None:
        rw = np.ones_like(xs)
    else:
        rw = np.ascontiguousarray(robustness_weights, dtype=np.float64)
    return _loess_at(xs, ys, xs, span, degree, rw)


def _bisquare_weights(resid: np.ndarray) -> np.ndarray:
    r = np.abs(resid)
    h = 6.0 * np.median(r)
    if h == 0.0:
        return (r == 0.0).astype(np.float64)
    u = r / h
    return np.where(u < 1.0, (1.0 - u * u) ** 2, 0.0)


def _running_mean(x: np.ndarray, k: int) -> np.ndarray:
    c = np.concatenate(([0.0], np.cumsum(x)))
    return (c[k:] - c[:-k]) / k


def _stl_inner(y, trend, rw, prm: StlParams):
    n = len(y)
    p = prm.period
    deg = prm.loess_degree
    detrended = y - trend
    cycle = np.empty(n + 2 * p)
    for j in range(p):
        sub = np.ascontiguousarray(detrended[j::p])
        k = len(sub)
        xs = np.arange(k, dtype=np.float64)
        xe = np.arange(-1, k + 1, dtype=np.float64)
        cycle[j::p] = _robust_loess_at(xs, sub, xe, prm.seasonal_span, deg, np.ascontiguousarray(rw[j::p]))
    low = _running_mean(_running_mean(_running_mean(cycle, p), p), 3)
    grid = np.arange(n, dtype=np.float64)
    low = _loess_at(grid, low, grid, prm.lowpass_span, deg, np.ones(n))
    seasonal = cycle[p:p + n] - low
    trend = _robust_loess_at(grid, y - seasonal, grid, prm.trend_span, deg, rw)
    return seasonal, trend


def decompose_stl(series: SampledSeries, params: StlParams) -> ComponentSet:
    """Loess-based decomposition with optional bisquare robustness passes."""
    series.require_complete()
    y = np.ascontiguousarray(series.values)
    n = len(y)
    if n < 2 * params.period:
        raise ValidationError(f"series of length {n} shorter than two periods of {params.period}")
    trend = np.zeros(n)
    rw = np.ones(n)
    for outer in range(params.outer_iterations + 1):
        for _ in range(params.inner_iterations):
            seasonal, trend = _stl_inner(y, trend, rw, params)
        if outer < params.outer_iterations:
            rw = _bisquare_weights(y - trend - seasonal)
    return _component_set(series, trend, seasonal, params.period, Method.STL)


def decompose(series: SampledSeries, method, period: int, henderson_terms: int = 13,
              stl: Optional[StlParams] = None) -> ComponentSet:
    method = Method(method)
    if method is Method.STD:
        return decompose_std(series, period, henderson_terms)
    return decompose_stl(series, stl if stl is not None else StlParams(period))
