"""CO2-to-occupancy lag selection by a per-lag least-squares sweep."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstantOccupancyError, ModelError, NoVarianceError, ValidationError
from .series import AlignedPair, SampledSeries, shift_and_trim

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RoomGeometry:
    length: float
    width: float
    height: float

    def __post_init__(self):
        if min(self.length, self.width, self.height) <= 0:
            raise ValidationError("room dimensions must be positive")

    @property
    def volume(self) -> float:
        return self.length * self.width * self.height


@dataclass(frozen=True)
class LagFit:
    """Occupancy-on-CO2 regression line at one lag."""

    lag: int
    slope: float
    intercept: float
    nrmse: float = math.nan

    def predict(self, co2):
        return self.slope * np.asarray(co2, dtype=np.float64) + self.intercept


def upper_bound_lag(geom: RoomGeometry) -> int:
    """Largest lag (in minutes) worth sweeping: floor(volume / 100)."""
    return max(0, math.floor(geom.volume / 100.0))


def minutes_to_samples(minutes: int, interval: int) -> int:
    """Convert a lag bound in minutes to whole samples, rounding down."""
    return int(minutes * 60 // interval)


def fit_line(pair: AlignedPair) -> LagFit:
    c = pair.co2.values
    o = pair.occupancy.values
    if len(c) < 2:
        raise ValidationError("need at least two aligned samples")
    dc = c - c.mean()
    sxx = float(dc @ dc)
    if np.all(c == c[0]):
        raise NoVarianceError("CO2 values have no variance", stage="fit_line")
    slope = float(dc @ (o - o.mean())) / sxx
    intercept = float(o.mean()) - slope * float(c.mean())
    return LagFit(pair.lag_applied, slope, intercept)


def nrmse(fit: LagFit, pair: AlignedPair) -> float:
    o = pair.occupancy.values
    spread = float(o.max() - o.min())
    if spread == 0.0:
        raise ConstantOccupancyError("occupancy is constant; NRMSE undefined", stage="nrmse")
    resid = o - fit.predict(pair.co2.values)
    return math.sqrt(float(np.mean(resid * resid))) / spread


def select_lag(co2: SampledSeries, occ: SampledSeries, ub: int):
    """Sweep lags ``0..ub`` (samples) and return ``(best_lag, sweep)``.

    Ties resolve to the smallest lag.
    """
    if ub < 0:
        raise ValidationError("upper bound must be >= 0")
    sweep = []
    for lag in range(ub + 1):
        try:
            pair = shift_and_trim(co2, occ, lag)
            if len(pair) < 2:
                raise ValidationError("fewer than two aligned samples")
            fit = fit_line(pair)
            fit = LagFit(lag, fit.slope, fit.intercept, nrmse(fit, pair))
        except (ModelError, ValidationError) as exc:
            raise type(exc)(f"lag {lag}: {exc}") from exc
        sweep.append(fit)
    best = min(sweep, key=lambda f: (f.nrmse, f.lag))
    return best.lag, sweep
