"""Well-mixed room CO2 mass balance driven by an occupancy schedule.

    dC/dt = (inflow * C_in - outflow * C) / V + source(t) / V

with the source in ppm m^3/s from occupant exhalation. Integrated by forward
Euler on a sub-grid and reported as per-interval means, labelled at the start
of each interval like :func:`cdhoc.series.resample`.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import ValidationError
from .lag import RoomGeometry
from .series import DAY, SampledSeries, Unit

# m^3/s per L/min
LPM = 1.0 / 60000.0


@dataclass(frozen=True)
class OccupantProfile:
    metabolic_rate: float = 58.2  # W/m^2
    respiratory_quotient: float = 0.83
    height: float = 170.0  # cm
    weight: float = 70.0  # kg

    def __post_init__(self):
        if min(self.metabolic_rate, self.height, self.weight) <= 0:
            raise ValidationError("occupant profile values must be positive")
        if not 0.6 < self.respiratory_quotient < 1.1:
            raise ValidationError("respiratory quotient must lie in (0.6, 1.1)")


def exhalation_rate(p: OccupantProfile) -> float:
    """CO2 exhaled per person in L/min."""
    rq = p.respiratory_quotient
    return p.metabolic_rate * rq * math.sqrt(p.height * p.weight) / (21132.0 * (0.23 * rq + 0.77))


@dataclass(frozen=True)
class RoomModel:
    geometry: RoomGeometry
    inflow: float  # m^3/s
    outflow: float  # m^3/s
    inlet_concentration: float = 400.0  # ppm
    initial_concentration: float = 400.0  # ppm

    def __post_init__(self):
        if self.inflow < 0 or self.outflow < 0:
            raise ValidationError("flows must be non-negative")
        if self.inlet_concentration < 0 or self.initial_concentration < 0:
            raise ValidationError("concentrations must be non-negative")

    @property
    def volume(self) -> float:
        return self.geometry.volume

    @property
    def time_constant(self) -> float:
        return math.inf if self.outflow == 0 else self.volume / self.outflow

    def steady_state(self, source_lpm: float) -> float:
        """Equilibrium ppm for a constant exhalation source (L/min)."""
        return (self.inflow * self.inlet_concentration + source_lpm * LPM * 1e6) / self.outflow


@dataclass(frozen=True)
class Occupancy:
    start: float
    end: float
    count: int
    profile: OccupantProfile = field(default_factory=OccupantProfile)


@dataclass(frozen=True)
class Schedule:
    entries: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        for e in self.entries:
            if e.count < 0:
                raise ValidationError("occupant counts must be >= 0")
            if e.end < e.start:
                raise ValidationError("schedule entry ends before it starts")

    def _accumulate(self, times, value):
        times = np.asarray(times, dtype=np.float64)
        out = np.zeros(times.shape)
        for e in self.entries:
            lo, hi = np.searchsorted(times, [e.start, e.end], side="left")
            out[lo:hi] += value(e)
        return out

    def count_at(self, times) -> np.ndarray:
        return self._accumulate(times, lambda e: e.count)

    def source_at(self, times) -> np.ndarray:
        """Total exhalation in L/min at each (sorted) time."""
        return self._accumulate(times, lambda e: e.count * exhalation_rate(e.profile))

    def validate_range(self, start: float, stop: float):
        for e in self.entries:
            if e.start < start or e.end > stop:
                raise ValidationError(f"schedule entry [{e.start}, {e.end}) outside the simulated range")


@dataclass(frozen=True)
class SensorNoise:
    sigma: float = 10.0  # ppm
    quantization: float = 1.0  # ppm
    seed: int = 0


def _substeps(room: RoomModel, interval: int, substep: Optional[float]) -> int:
    rate = room.outflow / room.volume
    if substep is None:
        steps = 10
        if rate > 0:
            # keep the Euler step at <= 1% of the time constant
            steps = max(steps, math.ceil(interval * rate / 0.01))
        return steps
    steps = interval / substep
    if abs(steps - round(steps)) > 1e-9 or round(steps) < 10:
        raise ValidationError("substep must divide the interval into at least 10 steps")
    steps = int(round(steps))
    if (interval / steps) * rate >= 1.0:
        raise ValidationError(
            f"unstable integration: step {interval / steps:g}s exceeds the {1 / rate:g}s time constant")
    return steps


def simulate(room: RoomModel, schedule: Schedule, interval: int, duration: int,
             noise: Optional[SensorNoise] = None, start_time: float = 0.0,
             substep: Optional[float] = None):
    """Return ``(co2, occupancy)`` series of ``duration // interval`` samples."""
    if interval <= 0 or duration <= 0 or duration % interval:
        raise ValidationError("interval must be positive and divide the duration")
    schedule.validate_range(start_time, start_time + duration)
    n = duration // interval
    m = _substeps(room, interval, substep)
    step = interval / m
    t_fine = start_time + step * np.arange(n * m, dtype=np.float64)
    source = schedule.source_at(t_fine) * LPM * 1e6 / room.volume  # ppm/s
    a = 1.0 - step * room.outflow / room.volume
    b = step * (room.inflow * room.inlet_concentration / room.volume + source)
    states = kernels.linear_recursion(a, float(room.initial_concentration), np.ascontiguousarray(b))
    co2 = states.reshape(n, m).mean(axis=1)
    if noise is not None:
        rng = np.random.default_rng(noise.seed)
        co2 = co2 + rng.normal(0.0, noise.sigma, n)
        if noise.quantization > 0:
            co2 = np.round(co2 / noise.quantization) * noise.quantization
        co2 = np.maximum(co2, 0.0)
    grid = start_time + interval * np.arange(n, dtype=np.float64)
    occ = schedule.count_at(grid)
    return (SampledSeries(start_time, interval, co2, Unit.PPM),
            SampledSeries(start_time, interval, occ, Unit.PERSONS))


# -- presets -------------------------------------------------------------------

def _epoch(year, month, day, utc_offset) -> float:
    local_midnight = dt.datetime(year, month, day, tzinfo=dt.timezone.utc).timestamp()
    return local_midnight - utc_offset


def _runs_to_schedule(counts: np.ndarray, start: float, interval: int, profile) -> list:
    entries = []
    edges = np.flatnonzero(np.diff(np.concatenate(([0], counts, [0]))) != 0)
    for lo, hi in zip(edges[:-1], edges[1:]):
        if counts[lo] > 0:
            entries.append(Occupancy(start + lo * interval, start + hi * interval, int(counts[lo]), profile))
    return entries


@dataclass(frozen=True)
class Preset:
    name: str
    room: RoomModel
    interval: int
    days: int
    start_time: float
    utc_offset: float
    max_occupants: int
    profile: OccupantProfile
    noise_sigma: float
    noise_quantization: float = 1.0

    @property
    def duration(self) -> int:
        return self.days * DAY

    def schedule(self, seed: int = 0) -> Schedule:
        rng = np.random.default_rng(seed)
        per_day = DAY // self.interval
        counts = np.zeros(self.days * per_day, dtype=np.int64)
        for d in range(self.days):
            weekday = (dt.datetime.fromtimestamp(self.start_time + self.utc_offset, dt.timezone.utc)
                       + dt.timedelta(days=d)).weekday()
            day = _office_day if self.name == "office" else _cinema_day
            counts[d * per_day:(d + 1) * per_day] = day(rng, self.interval, weekday, self.max_occupants)
        return Schedule(_runs_to_schedule(counts, self.start_time, self.interval, self.profile))

    def simulate(self, seed: int = 0, noise: bool = True):
        sched = self.schedule(seed)
        sensor = SensorNoise(self.noise_sigma, self.noise_quantization, seed) if noise else None
        return simulate(self.room, sched, self.interval, self.duration, sensor, self.start_time)


def _slot(hour: float, interval: int) -> int:
    return int(round(hour * 3600 / interval))


def _office_day(rng, interval, weekday, max_occ):
    """One staff member's working day: late-morning arrival, a lunch gap,
    seminars and external meetings away, and the odd group meeting."""
    per_day = DAY // interval
    counts = np.zeros(per_day, dtype=np.int64)
    if weekday >= 5:
        return counts
    arrive = _slot(rng.uniform(9.5, 10.5), interval)
    leave = _slot(rng.uniform(17.0, 18.0), interval)
    counts[arrive:leave] = 1
    lunch = _slot(rng.uniform(12.0, 13.0), interval)
    counts[lunch:lunch + _slot(rng.uniform(0.25, 1.0), interval)] = 0
    for lo, hi, chance, dur in ((10.5, 11.5, 0.3, (0.5, 1.0)), (13.5, 15.0, 0.5, (1.0, 2.0))):
        if rng.random() < chance:
            away = _slot(rng.uniform(lo, hi), interval)
            counts[away:away + _slot(rng.uniform(*dur), interval)] = 0
    if rng.random() < 0.5:
        at = _slot(rng.uniform(10.5, 16.5), interval)
        seg = slice(at, at + _slot(rng.uniform(0.5, 1.0), interval))
        counts[seg] = rng.integers(2, max_occ + 1)
    return counts


_SCREENINGS = (11.0, 14.0, 17.0, 20.0)


def _cinema_day(rng, interval, weekday, max_occ):
    per_day = DAY // interval
    counts = np.zeros(per_day, dtype=np.int64)
    busy = 1.6 if weekday >= 4 else 1.0
    for k, hour in enumerate(_SCREENINGS):
        start = _slot(hour + rng.choice([0.0, 0.25, 0.5]), interval)
        length = _slot(rng.uniform(1.5, 2.5), interval)
        popularity = (0.25 + 0.2 * k) * busy
        crowd = int(min(max_occ, rng.binomial(max_occ, min(1.0, popularity * rng.uniform(0.4, 1.0)))))
        counts[start:start + length] = crowd
    return counts


PRESETS = ("office", "cinema")


def preset(name: str) -> Preset:
    if name == "office":
        geom = RoomGeometry(3.0, 4.0, 5.0)
        flow = geom.volume / 600.0  # 6 air changes per hour
        return Preset("office", RoomModel(geom, flow, flow, 400.0, 400.0), 300, 14,
                      _epoch(2015, 5, 18, 36000), 36000, 4, OccupantProfile(70.0, 0.83, 172.0, 75.0),
                      noise_sigma=8.0)
    if name == "cinema":
        geom = RoomGeometry(30.0, 20.0, 10.0)
        flow = geom.volume / 3600.0  # 1 air change per hour
        return Preset("cinema", RoomModel(geom, flow, flow, 420.0, 420.0), 180, 23,
                      _epoch(2013, 12, 20, 3600), 3600, 300, OccupantProfile(58.2, 0.83, 170.0, 70.0),
                      noise_sigma=5.0)
    raise ValidationError(f"unknown preset {name!r}; choose 'office' or 'cinema'")
