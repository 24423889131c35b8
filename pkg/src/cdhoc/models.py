"""Per-component correlation models.

Trend and irregular components are mapped with polynomials pruned by AIC,
the seasonal component with a DTW-validated repeating motif, and nightly
vacancy with a learned zero-occupancy window.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import (AperiodicError, CollinearityError, NoVarianceError, ValidationError,
                     VacantWindowError)
from .series import DAY, SampledSeries, day_index, samples_per_day, seconds_of_day

RSS_FLOOR = 1e-12


def _as_array(x) -> np.ndarray:
    if isinstance(x, SampledSeries):
        return x.values
    return np.asarray(x, dtype=np.float64)


# -- polynomial models ---------------------------------------------------------

@dataclass(frozen=True)
class PolyModel:
    """``y = sum(coefficients[k] * x**k) + residual_offset``.

    ``coefficients`` is indexed by power; eliminated terms hold 0.0 and are
    absent from ``terms``.
    """

    coefficients: tuple
    terms: tuple
    residual_offset: float = 0.0
    aic: float = math.nan
    weakly_validated: bool = False
    pcc: Optional[float] = None

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x) -> np.ndarray:
        x = _as_array(x)
        out = np.full(x.shape, self.residual_offset, dtype=np.float64)
        for k in self.terms:
            out += self.coefficients[k] * x**k
        return out


def pearson_r(x, y) -> float:
    x = _as_array(x)
    y = _as_array(y)
    if len(x) != len(y) or len(x) < 2:
        raise ValidationError("pearson_r needs two sequences of equal length >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise NoVarianceError("correlation undefined for a constant input", stage="pearson_r")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def aic(rss: float, n: int, k: int, floor: float = RSS_FLOOR) -> float:
    """Gaussian least-squares AIC, ``n * ln(rss / n) + 2k``."""
    if not n > k >= 1:
        raise ValidationError(f"AIC needs n > k >= 1 (n={n}, k={k})")
    if rss < 0:
        raise ValidationError("rss must be non-negative")
    return n * math.log(max(rss, floor) / n) + 2 * k


def _design(x: np.ndarray, powers: Sequence[int]) -> np.ndarray:
    return np.column_stack([x**k for k in powers])


def _lstsq(x, y, powers):
    a = _design(x, powers)
    scale = np.linalg.norm(a, axis=0)
    scale[scale == 0] = 1.0
    sol, _, rank, _ = np.linalg.lstsq(a / scale, y, rcond=None)
    if rank < len(powers):
        raise CollinearityError(f"design with powers {list(powers)} is rank deficient", stage="fit_poly")
    beta = sol / scale
    resid = y - a @ beta
    return beta, float(resid @ resid)


def fit_poly_m5(x, y, max_degree: int = 3, selection: str = "exhaustive") -> PolyModel:
    """Least-squares polynomial of ``max_degree`` with AIC term selection.

    ``selection="greedy"`` starts from all powers ``0..max_degree`` and
    repeatedly drops the term whose removal gives the lowest AIC, as long as
    that AIC beats the current one. Greedy elimination can stop in a local
    optimum, so the default ``"exhaustive"`` scores every non-empty subset of
    powers and keeps the lowest AIC (ties go to fewer terms, then to lower
    powers).
    """
    x = _as_array(x)
    y = _as_array(y)
    if len(x) != len(y):
        raise ValidationError("x and y differ in length")
    if max_degree < 1:
        raise ValidationError("max_degree must be >= 1")
    if selection not in ("greedy", "exhaustive"):
        raise ValidationError(f"unknown term selection {selection!r}")
    if len(x) < max_degree + 2:
        raise ValidationError(f"need at least {max_degree + 2} points for degree {max_degree}")
    if np.all(x == x[0]):
        raise NoVarianceError("regressor is constant", stage="fit_poly")
    n = len(x)
    terms = list(range(max_degree + 1))
    beta, rss = _lstsq(x, y, terms)
    best_aic = aic(rss, n, len(terms))
    if selection == "exhaustive":
        for r in range(1, max_degree + 2):
            for sub in itertools.combinations(range(max_degree + 1), r):
                b, res = _lstsq(x, y, sub)
                score = aic(res, n, r)
                if score < best_aic or (score == best_aic and r < len(terms)):
                    best_aic, terms, beta = score, list(sub), b
    else:
        while len(terms) > 1:
            trials = []
            for k in terms:
                sub = [t for t in terms if t != k]
                b, r = _lstsq(x, y, sub)
                trials.append((aic(r, n, len(sub)), k, sub, b))
            cand_aic, _, sub, b = min(trials, key=lambda t: (t[0], -t[1]))
            if not cand_aic < best_aic:
                break
            best_aic, terms, beta = cand_aic, sub, b
    coefs = np.zeros(max(terms) + 1)
    coefs[terms] = beta
    offset = 0.0 if 0 in terms else float(np.mean(y - _design(x, terms) @ beta))
    return PolyModel(tuple(float(c) for c in coefs), tuple(terms), offset, best_aic)


def correlate_trend(t_c, t_o, max_degree: int = 3, pcc_threshold: float = 0.7,
                    absolute_target: bool = True, selection: str = "exhaustive") -> PolyModel:
    """Map the CO2 trend to the occupancy trend on absolute values.

    Below the correlation gate the fit degrades to a straight line and the
    model is flagged ``weakly_validated``. With ``absolute_target=False`` the
    occupancy trend keeps its sign (the CO2 side is always made absolute).
    """
    t_c = _as_array(t_c)
    t_o = _as_array(t_o)
    if len(t_c) != len(t_o):
        raise ValidationError("trend series differ in length")
    r = pearson_r(t_c, t_o)
    x = np.abs(t_c)
    y = np.abs(t_o) if absolute_target else t_o
    if r > pcc_threshold:
        m = fit_poly_m5(x, y, max_degree, selection)
        weak = False
    else:
        beta, rss = _lstsq(x, y, [0, 1])
        m = PolyModel((float(beta[0]), float(beta[1])), (0, 1), 0.0, aic(rss, len(x), 2))
        weak = True
    return PolyModel(m.coefficients, m.terms, m.residual_offset, m.aic, weak, r)


# -- seasonal motif ------------------------------------------------------------

def dtw_cost(a, b):
    """``(cost, path_length)`` of the optimal absolute-difference DTW alignment."""
    a = np.ascontiguousarray(_as_array(a), dtype=np.float64)
    b = np.ascontiguousarray(_as_array(b), dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValidationError("DTW needs non-empty sequences")
    cost, length = kernels.dtw(a, b)
    return float(cost), int(length)


def dtw_similarity(a, b) -> float:
    """Alignment cost rescaled to a 0-100 score by path length and joint value range."""
    a = _as_array(a)
    b = _as_array(b)
    cost, length = dtw_cost(a, b)
    spread = max(a.max(), b.max()) - min(a.min(), b.min())
    if spread == 0.0:
        return 100.0
    return float(min(100.0, max(0.0, 100.0 * (1.0 - cost / (length * spread)))))


@dataclass(frozen=True, eq=False)
class SeasonalMotif:
    values: np.ndarray
    source_len: int
    similarity: float
    threshold: float = 95.0

    @property
    def accepted(self) -> bool:
        return len(self.values) > 0 and self.similarity > self.threshold

    def __len__(self):
        return len(self.values)


def find_repeated_sequence(seasonal, threshold: float = 95.0, tolerance: float = 0.01,
                           min_length: int = 2) -> SeasonalMotif:
    """First prefix of ``seasonal`` that repeats immediately after itself.

    The prefix grows one sample at a time from ``min_length``; whenever the
    next sample comes back to the starting value (within ``tolerance`` times
    the series range), the prefix ``s[0:L]`` is compared with ``s[L:2L]`` by
    DTW similarity and accepted when the score exceeds ``threshold``.

    Flat stretches make short prefixes look periodic to DTW, so callers that
    know the decomposition period usually pass it as ``min_length``.
    """
    s = _as_array(seasonal)
    n = len(s)
    if n < 4:
        raise ValidationError("seasonal series too short to search for a motif")
    if min_length < 2:
        raise ValidationError("min_length must be >= 2")
    start = s[0]
    eps = tolerance * float(s.max() - s.min())
    for length in range(min_length, n // 2 + 1):
        if abs(s[length] - start) > eps:
            continue
        score = dtw_similarity(s[:length], s[length:2 * length])
        if score > threshold:
            return SeasonalMotif(s[:length].copy(), n, score, threshold)
    raise AperiodicError("no repeating motif found in the seasonal component", stage="seasonal")


@dataclass(frozen=True, eq=False)
class SeasonalMap:
    """Occupancy motif tiled over time from ``anchor_time`` onwards."""

    occupancy_motif: np.ndarray
    phase_anchor: int
    anchor_time: float
    interval: int

    def __len__(self):
        return len(self.occupancy_motif)

    def at(self, times) -> np.ndarray:
        steps = np.rint((np.asarray(times, dtype=np.float64) - self.anchor_time) / self.interval)
        return self.occupancy_motif[np.mod(steps.astype(np.int64), len(self.occupancy_motif))]


def stretch(values, length: int) -> np.ndarray:
    """Resize by linear interpolation (longer) or uniform subsampling (shorter)."""
    values = _as_array(values)
    n = len(values)
    if n == length:
        return values.copy()
    if n < length:
        return np.interp(np.linspace(0.0, n - 1, length), np.arange(n), values)
    return values[(np.arange(length) * n) // length].copy()


def align_motifs(motif_o: SeasonalMotif, motif_c: SeasonalMotif, anchor_time: float, interval: int,
                 utc_offset: float = 0.0) -> SeasonalMap:
    for name, m in (("occupancy", motif_o), ("CO2", motif_c)):
        if not m.accepted:
            raise AperiodicError(f"{name} motif was not accepted (similarity {m.similarity:.1f})",
                                 stage="seasonal")
    anchor = int(seconds_of_day(anchor_time, utc_offset) // interval)
    return SeasonalMap(stretch(motif_o.values, len(motif_c)), anchor, anchor_time, interval)


def phase_mean_map(seasonal: SampledSeries, period: int) -> SeasonalMap:
    """Fallback motif: per-phase average of the seasonal component."""
    s = seasonal.values
    motif = np.array([s[j::period].mean() for j in range(period)])
    return SeasonalMap(motif, 0, seasonal.start_time, seasonal.interval)


# -- zero pattern adjustment ---------------------------------------------------

NIGHT = (0.0, 6 * 3600.0)


@dataclass(frozen=True)
class VacantWindow:
    """Daily local-time interval ``[start, end)`` in seconds; wraps when start > end."""

    start: float
    end: float
    min_days_observed: int
    utc_offset: float = 0.0

    def contains(self, times) -> np.ndarray:
        sod = seconds_of_day(times, self.utc_offset)
        if self.end - self.start >= DAY:
            return np.ones(sod.shape, dtype=bool)
        if self.start < self.end:
            return (sod >= self.start) & (sod < self.end)
        return (sod >= self.start) | (sod < self.end)


def learn_zpa(occupancy: SampledSeries, utc_offset: float = 0.0, night=NIGHT) -> VacantWindow:
    """Longest daily interval overlapping the night band that was vacant on every observed day."""
    interval = occupancy.interval
    per_day = samples_per_day(interval)
    times = occupancy.times
    days = day_index(times, utc_offset)
    if len(np.unique(days)) < 2:
        raise VacantWindowError("need at least two days of occupancy history", stage="zpa")
    slot = (seconds_of_day(times, utc_offset) // interval).astype(np.int64)
    seen = np.zeros(per_day, dtype=np.int64)
    np.add.at(seen, slot, 1)
    busy = np.zeros(per_day, dtype=bool)
    busy[slot[occupancy.values != 0]] = True
    vacant = (seen > 0) & ~busy
    day_count = np.zeros(per_day, dtype=np.int64)
    for d in np.unique(days):
        day_count[np.unique(slot[days == d])] += 1
    if vacant.all():
        return VacantWindow(0.0, float(DAY), int(day_count.min()), utc_offset)
    if not vacant.any():
        raise VacantWindowError("no time of day is vacant on every observed day", stage="zpa")
    # circular runs, starting the scan just after an occupied slot
    first_busy = int(np.flatnonzero(~vacant)[0])
    order = (first_busy + 1 + np.arange(per_day)) % per_day
    runs, cur = [], []
    for s in order:
        if vacant[s]:
            cur.append(int(s))
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    night_slots = set(range(int(night[0] // interval), int(math.ceil(night[1] / interval))))
    runs = [r for r in runs if night_slots.intersection(r)]
    if not runs:
        raise VacantWindowError("no always-vacant interval overlaps the night", stage="zpa")
    run = max(runs, key=len)
    return VacantWindow(float(run[0] * interval), float(((run[-1] + 1) * interval) % DAY),
                        int(day_count[run].min()), utc_offset)
