"""Training and prediction pipeline for CO2-driven occupancy estimates.

Occupancy at time ``t`` is estimated from CO2 at ``t + lag``. Both series are
split into trend, seasonal and irregular parts and each occupancy part is
predicted from its CO2 counterpart; the parts are summed, clamped at zero and
rounded to whole persons.
"""

from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .decomp import ComponentSet, Method, StlParams, decompose
from .errors import AperiodicError, ModelError, ValidationError, VacantWindowError
from .lag import LagFit, RoomGeometry, minutes_to_samples, select_lag, upper_bound_lag
from .models import (PolyModel, SeasonalMap, VacantWindow, align_motifs, correlate_trend,
                     find_repeated_sequence, fit_poly_m5, learn_zpa, phase_mean_map)
from .series import SampledSeries, Unit, samples_per_day, shift_and_trim

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    method: Method = Method.STD
    period: Optional[int] = None  # samples; one day when unset
    max_lag: Optional[int] = None  # samples; derived from ``room`` when unset
    room: Optional[RoomGeometry] = None
    max_degree: int = 3
    dtw_threshold: float = 95.0
    pcc_threshold: float = 0.7
    trend_target: str = "absolute"  # or "signed"
    term_selection: str = "exhaustive"  # or "greedy"
    motif_tolerance: float = 0.01
    motif_min_length: Optional[int] = None  # samples; the period when unset
    henderson_terms: int = 13
    stl: Optional[StlParams] = None
    utc_offset: float = 0.0
    zpa: bool = True
    context_periods: int = 3

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.period is not None and self.period < 2:
            raise ValidationError("period must be >= 2 samples")
        if self.max_lag is not None and self.max_lag < 0:
            raise ValidationError("max_lag must be >= 0")
        if self.max_degree < 1:
            raise ValidationError("max_degree must be >= 1")
        if self.context_periods < 0:
            raise ValidationError("context_periods must be >= 0")
        if self.trend_target not in ("absolute", "signed"):
            raise ValidationError("trend_target must be 'absolute' or 'signed'")
        if self.term_selection not in ("exhaustive", "greedy"):
            raise ValidationError("term_selection must be 'exhaustive' or 'greedy'")

    def resolve_period(self, interval: int) -> int:
        return self.period if self.period is not None else samples_per_day(interval)

    def resolve_max_lag(self, interval: int) -> int:
        if self.max_lag is not None:
            return self.max_lag
        if self.room is not None:
            return minutes_to_samples(upper_bound_lag(self.room), interval)
        return 0

    def stl_params(self, period: int) -> StlParams:
        if self.stl is None:
            return StlParams(period)
        if self.stl.period == period:
            return self.stl
        # spans that were derived from the old period are re-derived from the new one
        derived = StlParams(self.stl.period, self.stl.seasonal_span)
        keep = {name: getattr(self.stl, name) for name in ("trend_span", "lowpass_span")
                if getattr(self.stl, name) != getattr(derived, name)}
        return StlParams(period, self.stl.seasonal_span, inner_iterations=self.stl.inner_iterations,
                         outer_iterations=self.stl.outer_iterations, loess_degree=self.stl.loess_degree,
                         **keep)


@dataclass(frozen=True, eq=False)
class OccupancyModel:
    method: Method
    period: int
    lag: int
    interval: int
    trend_model: PolyModel
    seasonal_map: SeasonalMap
    irregular_model: PolyModel
    zpa: Optional[VacantWindow]
    training_range: tuple
    henderson_terms: int = 13
    stl: Optional[StlParams] = None
    context: Optional[SampledSeries] = None  # trailing training CO2
    seasonal_fallback: bool = False
    sweep: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.lag < 0:
            raise ValidationError("lag must be >= 0")

    @property
    def weakly_validated(self) -> bool:
        return self.trend_model.weakly_validated

    def without_zpa(self) -> "OccupancyModel":
        return replace(self, zpa=None)

    def decompose(self, co2: SampledSeries) -> ComponentSet:
        return decompose(co2, self.method, self.period, self.henderson_terms, self.stl)


@dataclass(frozen=True, eq=False)
class PredictionResult:
    occupancy: SampledSeries
    components: ComponentSet
    zpa_mask: np.ndarray
    raw: np.ndarray  # unrounded component sum, ZPA included


@contextlib.contextmanager
def _stage(name: str):
    try:
        yield
    except ModelError as exc:
        if exc.stage is not None:
            raise
        raise type(exc)(str(exc), stage=name) from exc


def train(co2: SampledSeries, occ: SampledSeries, config: TrainConfig = TrainConfig()) -> OccupancyModel:
    if co2.interval != occ.interval:
        raise ValidationError("CO2 and occupancy intervals differ")
    if co2.start_time != occ.start_time:
        raise ValidationError("CO2 and occupancy must start at the same time")
    co2.require_complete()
    occ.require_complete()
    interval = co2.interval
    period = config.resolve_period(interval)
    stl = config.stl_params(period) if config.method is Method.STL else None

    with _stage("lag"):
        lag, sweep = select_lag(co2, occ, config.resolve_max_lag(interval))
    pair = shift_and_trim(co2, occ, lag)
    if len(pair) < 3 * period:
        raise ValidationError(f"aligned training data ({len(pair)} samples) shorter than three periods")

    with _stage("decompose"):
        comp_c = decompose(pair.co2, config.method, period, config.henderson_terms, stl)
        comp_o = decompose(pair.occupancy, config.method, period, config.henderson_terms, stl)

    with _stage("trend"):
        trend_model = correlate_trend(comp_c.trend.values, comp_o.trend.values, config.max_degree,
                                      config.pcc_threshold, config.trend_target == "absolute",
                                      config.term_selection)
    if trend_model.weakly_validated:
        log.warning("trend correlation %.3f below %.2f; using a linear trend map",
                    trend_model.pcc, config.pcc_threshold)

    fallback = False
    with _stage("seasonal"):
        try:
            min_len = config.motif_min_length or period
            motif_c = find_repeated_sequence(comp_c.seasonal, config.dtw_threshold,
                                             config.motif_tolerance, min_len)
            motif_o = find_repeated_sequence(comp_o.seasonal, config.dtw_threshold,
                                             config.motif_tolerance, min_len)
            seasonal_map = align_motifs(motif_o, motif_c, pair.occupancy.start_time, interval,
                                        config.utc_offset)
        except AperiodicError as exc:
            log.warning("%s; falling back to per-phase seasonal means", exc)
            seasonal_map = phase_mean_map(comp_o.seasonal, period)
            fallback = True

    with _stage("irregular"):
        irregular_model = fit_poly_m5(comp_c.irregular.values, comp_o.irregular.values, config.max_degree,
                                      config.term_selection)

    zpa = None
    if config.zpa:
        try:
            zpa = learn_zpa(occ, config.utc_offset)
        except VacantWindowError as exc:
            log.warning("%s; zero pattern adjustment disabled", exc)

    keep = min(len(co2), config.context_periods * period)
    context = co2.slice(len(co2) - keep, len(co2)) if keep else None
    return OccupancyModel(config.method, period, lag, interval, trend_model, seasonal_map,
                          irregular_model, zpa, (co2.start_time, co2.end_time), config.henderson_terms,
                          stl, context, fallback, tuple(sweep))


def reconstruct(t, s, e, zpa=0.0):
    """Whole-person occupancy from component values; works on scalars and arrays."""
    total = np.maximum(0.0, np.asarray(t, dtype=np.float64) + s + e + zpa)
    out = np.rint(total)  # round half to even
    return int(out) if out.ndim == 0 else out


def _with_context(model: OccupancyModel, co2: SampledSeries):
    """Series to decompose and the index of ``co2[0]`` inside it.

    The stored context is prepended when ``co2`` continues the training data,
    or when ``co2`` alone is too short to decompose. A series still shorter
    than three periods is padded on the left by cycling its own values.
    """
    ctx = model.context
    values = co2.values
    offset = 0
    need = 3 * model.period
    if ctx is not None:
        contiguous = ctx.end_time + ctx.interval == co2.start_time
        if contiguous or len(values) < need:
            if not contiguous:
                log.warning("future window shorter than three periods; prepending non-contiguous "
                            "training context")
            values = np.concatenate([ctx.values, values])
            offset = len(ctx)
    if len(values) < need:
        log.warning("future window shorter than three periods; padding by periodic extension")
        pad = need - len(values)
        values = np.concatenate([values[np.arange(-pad, 0) % len(values)], values])
        offset += pad
    if offset == 0:
        return co2, 0
    start = co2.start_time - offset * co2.interval
    return SampledSeries(start, co2.interval, values, co2.unit), offset


def predict(model: OccupancyModel, co2_future: SampledSeries) -> PredictionResult:
    """Occupancy for ``co2_future.times[: len - lag]``.

    When ``co2_future`` continues the training data, the stored trailing CO2 is
    prepended before decomposition so the filters are not started cold. Short
    windows are extended as described in :func:`_with_context`.
    """
    if co2_future.interval != model.interval:
        raise ValidationError(f"interval {co2_future.interval}s differs from the trained {model.interval}s")
    co2_future.require_complete()
    n = len(co2_future) - model.lag
    if n < 1:
        raise ValidationError("future CO2 shorter than the trained lag")
    if len(co2_future) < model.period:
        log.warning("future window shorter than one period; seasonal motif is tiled partially")
    series, offset = _with_context(model, co2_future)
    with _stage("decompose"):
        comp = model.decompose(series).slice(offset + model.lag, offset + len(co2_future))
    times = co2_future.times[:n]
    start = co2_future.start_time

    trend = model.trend_model(np.abs(comp.trend.values))
    seasonal = model.seasonal_map.at(times)
    irregular = model.irregular_model(comp.irregular.values)
    total = trend + seasonal + irregular
    if model.zpa is not None:
        mask = model.zpa.contains(times)
    else:
        mask = np.zeros(n, dtype=bool)
    raw = np.where(mask, 0.0, total)
    occupancy = reconstruct(raw, 0.0, 0.0)

    def mk(values):
        return SampledSeries(start, model.interval, values, Unit.DIMENSIONLESS)

    parts = ComponentSet(mk(trend), mk(seasonal), mk(irregular), model.period, model.method)
    return PredictionResult(SampledSeries(start, model.interval, occupancy, Unit.PERSONS), parts, mask, raw)
