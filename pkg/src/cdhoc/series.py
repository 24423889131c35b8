"""Uniformly sampled series, resampling, gap filling and lag alignment.

Timestamps are UTC epoch seconds. Local wall-clock time only enters through
an explicit ``utc_offset`` (seconds) in the helpers at the bottom.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import GapTooLongError, ValidationError

DAY = 86400


class Unit(str, enum.Enum):
    PPM = "ppm"
    PERSONS = "persons"
    DIMENSIONLESS = "dimensionless"


@dataclass(frozen=True, eq=False)
class SampledSeries:
    """Values on a uniform time grid.

    ``missing`` is an optional boolean mask marking samples that were absent
    at ingestion; masked slots hold a placeholder 0.0 and must be resolved with
    :func:`fill_gaps` before any computation uses the series.
    """

    start_time: float
    interval: int
    values: np.ndarray
    unit: Unit = Unit.DIMENSIONLESS
    missing: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if int(self.interval) != self.interval or self.interval <= 0:
            raise ValidationError(f"interval must be a positive integer, got {self.interval!r}")
        object.__setattr__(self, "interval", int(self.interval))
        object.__setattr__(self, "unit", Unit(self.unit))
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        missing = None
        if self.missing is not None:
            missing = np.array(self.missing, dtype=bool).reshape(-1)
            if missing.shape != values.shape:
                raise ValidationError("missing mask length differs from values")
            if not missing.any():
                missing = None
            else:
                values[missing] = 0.0
                missing.setflags(write=False)
        if not np.all(np.isfinite(values)):
            raise ValidationError("series values must be finite; mark absent samples as missing")
        if self.unit is Unit.PERSONS and np.any(values < 0):
            raise ValidationError("occupancy values must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    @classmethod
    def from_optional(cls, start_time, interval, values: Sequence[Optional[float]], unit=Unit.DIMENSIONLESS):
        """Build a series where ``None`` entries are missing samples."""
        mask = np.array([v is None for v in values], dtype=bool)
        vals = np.array([0.0 if v is None else float(v) for v in values])
        return cls(start_time, interval, vals, unit, mask)

    def __len__(self):
        return len(self.values)

    @property
    def has_missing(self) -> bool:
        return self.missing is not None

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.interval * np.arange(len(self.values), dtype=np.float64)

    @property
    def end_time(self) -> float:
        """Timestamp of the last sample."""
        return self.start_time + self.interval * (len(self.values) - 1)

    def with_values(self, values, unit=None) -> "SampledSeries":
        return SampledSeries(self.start_time, self.interval, values, self.unit if unit is None else unit)

    def slice(self, start: int, stop: int) -> "SampledSeries":
        start = max(0, start)
        stop = min(len(self), stop)
        miss = None if self.missing is None else self.missing[start:stop]
        return SampledSeries(self.start_time + start * self.interval, self.interval,
                             self.values[start:stop], self.unit, miss)

    def index_of(self, t: float) -> int:
        """Sample index of timestamp ``t`` (must lie on the grid)."""
        k = (t - self.start_time) / self.interval
        if abs(k - round(k)) > 1e-9:
            raise ValidationError(f"timestamp {t} is not on the sampling grid")
        return int(round(k))

    def require_complete(self):
        if len(self) == 0:
            raise ValidationError("series is empty")
        if self.missing is not None:
            raise ValidationError("series has missing samples; run fill_gaps first")


@dataclass(frozen=True, eq=False)
class AlignedPair:
    co2: SampledSeries
    occupancy: SampledSeries
    lag_applied: int = 0

    def __post_init__(self):
        if len(self.co2) != len(self.occupancy):
            raise ValidationError("aligned series must have equal length")
        if self.co2.interval != self.occupancy.interval:
            raise ValidationError("aligned series must share the sampling interval")
        if self.lag_applied < 0:
            raise ValidationError("lag_applied must be >= 0")

    def __len__(self):
        return len(self.co2)

    @property
    def interval(self) -> int:
        return self.co2.interval

    def slice(self, start: int, stop: int) -> "AlignedPair":
        return AlignedPair(self.co2.slice(start, stop), self.occupancy.slice(start, stop), self.lag_applied)


def resample(series: SampledSeries, target_interval: int, mode: str = "auto") -> SampledSeries:
    """Move ``series`` onto a grid with spacing ``target_interval`` seconds.

    Downsampling to a multiple of the source interval averages each window
    (labelled at its start; a trailing partial window averages what it has).
    Upsampling to a divisor interpolates linearly. Any other ratio requires
    ``mode="interpolate"``.
    """
    series.require_complete()
    if target_interval <= 0 or int(target_interval) != target_interval:
        raise ValidationError("target interval must be a positive integer")
    target_interval = int(target_interval)
    src = series.interval
    n = len(series)
    if target_interval == src:
        return series
    if mode not in ("auto", "mean", "interpolate"):
        raise ValidationError(f"unknown resample mode {mode!r}")
    if mode != "interpolate" and target_interval % src == 0:
        k = target_interval // src
        m = -(-n // k)
        sums = np.add.reduceat(series.values, np.arange(0, n, k))
        counts = np.minimum(k, n - np.arange(0, n, k))
        return SampledSeries(series.start_time, target_interval, sums[:m] / counts, series.unit)
    if mode == "mean":
        raise ValidationError("mean resampling needs a target that is a multiple of the source interval")
    if mode == "auto" and src % target_interval != 0:
        raise ValidationError(
            f"interval {target_interval}s is neither a multiple nor a divisor of {src}s; "
            "pass mode='interpolate'")
    span = src * (n - 1)
    m = span // target_interval + 1
    t_new = np.arange(m, dtype=np.float64) * target_interval
    t_old = np.arange(n, dtype=np.float64) * src
    return SampledSeries(series.start_time, target_interval, np.interp(t_new, t_old, series.values), series.unit)


def fill_gaps(series: SampledSeries, max_gap: int) -> SampledSeries:
    """Linearly interpolate runs of missing samples no longer than ``max_gap``."""
    if len(series) == 0:
        raise ValidationError("series is empty")
    if series.missing is None:
        return series
    miss = series.missing
    if miss[0] or miss[-1]:
        raise ValidationError("cannot interpolate leading or trailing missing values")
    edges = np.diff(np.concatenate(([0], miss.astype(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    longest = int((stops - starts).max())
    if longest > max_gap:
        i = int(starts[np.argmax(stops - starts)])
        raise GapTooLongError(f"gap of {longest} samples at index {i} exceeds max_gap={max_gap}")
    idx = np.arange(len(series))
    good = ~miss
    values = series.values.copy()
    values[miss] = np.interp(idx[miss], idx[good], series.values[good])
    return SampledSeries(series.start_time, series.interval, values, series.unit)


def shift_and_trim(co2: SampledSeries, occupancy: SampledSeries, lag: int) -> AlignedPair:
    """Pair ``occupancy[t]`` with ``co2[t + lag]`` and trim to the common length."""
    if co2.interval != occupancy.interval:
        raise ValidationError(f"interval mismatch: {co2.interval}s vs {occupancy.interval}s")
    if lag < 0:
        raise ValidationError("lag must be >= 0")
    if lag >= len(co2):
        raise ValidationError(f"lag {lag} is not shorter than the CO2 series ({len(co2)})")
    n = min(len(co2) - lag, len(occupancy))
    c = SampledSeries(occupancy.start_time, co2.interval, co2.values[lag:lag + n], co2.unit)
    o = occupancy.slice(0, n)
    return AlignedPair(c, o, lag)


def seconds_of_day(times, utc_offset: float = 0.0) -> np.ndarray:
    return np.mod(np.asarray(times, dtype=np.float64) + utc_offset, DAY)


def day_index(times, utc_offset: float = 0.0) -> np.ndarray:
    """Local calendar day number (days since the epoch, local midnight boundaries)."""
    return np.floor((np.asarray(times, dtype=np.float64) + utc_offset) / DAY).astype(np.int64)


def samples_per_day(interval: int) -> int:
    if DAY % interval:
        raise ValidationError(f"interval {interval}s does not divide a day")
    return DAY // interval

