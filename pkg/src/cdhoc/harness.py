"""Evaluation protocol: tolerance accuracy over incremental day splits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .decomp import Method
from .errors import CdhocError, ValidationError
from .lag import select_lag
from .predictor import TrainConfig, predict, train
from .series import DAY, AlignedPair, SampledSeries, samples_per_day, seconds_of_day
from .svr import fit_svr, predict_svr

log = logging.getLogger(__name__)

METHODS = ("STD", "STL", "SVR")


def _values(x) -> np.ndarray:
    return x.values if isinstance(x, SampledSeries) else np.asarray(x, dtype=np.float64)


def accuracy_with_tolerance(pred, actual, x: float) -> float:
    """Percentage of samples with ``|pred - actual| <= x``."""
    p, a = _values(pred), _values(actual)
    if len(p) != len(a):
        raise ValidationError(f"prediction length {len(p)} differs from actual length {len(a)}")
    if len(p) == 0:
        raise ValidationError("cannot score an empty prediction")
    if x < 0:
        raise ValidationError("tolerance must be >= 0")
    return 100.0 * float(np.count_nonzero(np.abs(p - a) <= x)) / len(p)


@dataclass(frozen=True)
class Split:
    train_days: int
    test_days: int
    train: slice  # sample indices into the dataset
    test: slice


def incremental_splits(dataset: AlignedPair, utc_offset: float = 0.0, min_training_days: int = 1):
    """Train on the first ``ceil(D/2)`` whole local days, then grow by one day
    until a single test day remains. Leading samples before the first local
    midnight and any trailing partial day are ignored."""
    interval = dataset.interval
    per_day = samples_per_day(interval)
    n = len(dataset)
    offset = float(seconds_of_day(dataset.co2.start_time, utc_offset)) if n else 0.0
    first = 0 if offset == 0.0 else math.ceil((DAY - offset) / interval)
    whole = max(0, n - first) // per_day
    if whole < 2:
        raise ValidationError(f"need at least 2 whole days, found {whole}")
    out = []
    for k in range(max(math.ceil(whole / 2), min_training_days), whole):
        out.append(Split(k, whole - k, slice(first, first + k * per_day),
                         slice(first + k * per_day, first + whole * per_day)))
    return out


@dataclass(frozen=True)
class EvalConfig:
    tolerances: tuple = (0, 1)
    methods: tuple = METHODS
    min_training_days: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    svr_window: int = 4
    svr_epsilon: float = 0.5
    svr_c: float = 1.0
    svr_epochs: int = 30
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "tolerances", tuple(self.tolerances))
        object.__setattr__(self, "methods", tuple(m.upper() for m in self.methods))
        if any(t < 0 for t in self.tolerances):
            raise ValidationError("tolerances must be >= 0")
        if self.min_training_days < 1:
            raise ValidationError("min_training_days must be >= 1")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValidationError(f"unknown methods: {sorted(bad)}")


@dataclass(frozen=True)
class ReportRow:
    train_days: int
    test_days: int
    method: str
    tolerance: float
    accuracy: float  # nan when the cell failed
    mae: float
    error: str = ""


@dataclass(frozen=True)
class CellPrediction:
    train_days: int
    method: str
    times: np.ndarray
    predicted: np.ndarray
    actual: np.ndarray


@dataclass
class EvalReport:
    rows: list
    predictions: list = field(default_factory=list, repr=False)

    def averages(self) -> dict:
        """Mean accuracy per ``(method, tolerance)`` over the cells that ran."""
        groups = {}
        for r in self.rows:
            if not math.isnan(r.accuracy):
                groups.setdefault((r.method, r.tolerance), []).append(r.accuracy)
        return {k: float(np.mean(v)) for k, v in groups.items()}

    def failures(self) -> list:
        return [r for r in self.rows if r.error]

    def csv_rows(self):
        yield ("train_days", "test_days", "method", "tolerance", "accuracy", "mae", "error")
        for r in self.rows:
            yield (r.train_days, r.test_days, r.method, r.tolerance, repr(r.accuracy), repr(r.mae), r.error)
        for (method, tol), acc in sorted(self.averages().items()):
            yield ("average", "", method, tol, repr(acc), "", "")

    def table(self) -> str:
        tols = sorted({r.tolerance for r in self.rows})
        methods = [m for m in METHODS if any(r.method == m for r in self.rows)]
        cells = {(r.train_days, r.method, r.tolerance): r for r in self.rows}
        head = ["train", "test"] + [f"{m}@{t:g}" for t in tols for m in methods]
        lines = [head]
        for tr, te in sorted({(r.train_days, r.test_days) for r in self.rows}):
            line = [str(tr), str(te)]
            for t in tols:
                for m in methods:
                    r = cells.get((tr, m, t))
                    line.append("-" if r is None or math.isnan(r.accuracy) else f"{r.accuracy:.2f}")
            lines.append(line)
        avg = self.averages()
        lines.append(["avg", ""] + [f"{avg[(m, t)]:.2f}" if (m, t) in avg else "-"
                                    for t in tols for m in methods])
        widths = [max(len(row[i]) for row in lines) for i in range(len(head))]
        return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in lines)


def _crop(pred: SampledSeries, actual: SampledSeries):
    """Overlap of a prediction with the actual series, by timestamp."""
    lo = max(pred.start_time, actual.start_time)
    hi = min(pred.end_time, actual.end_time)
    if hi < lo:
        raise ValidationError("prediction does not overlap the test range")
    p0, a0 = pred.index_of(lo), actual.index_of(lo)
    n = int(round((hi - lo) / pred.interval)) + 1
    return pred.slice(p0, p0 + n), actual.slice(a0, a0 + n)


def _run_cell(method, dataset: AlignedPair, split: Split, cfg: EvalConfig, lag_cache: dict):
    co2, occ = dataset.co2, dataset.occupancy
    tr = split.train
    train_co2 = co2.slice(tr.start, tr.stop)
    train_occ = occ.slice(tr.start, tr.stop)
    test_occ = occ.slice(split.test.start, split.test.stop)
    if method == "SVR":
        if split.train_days not in lag_cache:
            ub = cfg.train.resolve_max_lag(co2.interval)
            lag_cache[split.train_days] = select_lag(train_co2, train_occ, ub)[0]
        model = fit_svr(train_co2, train_occ, lag_cache[split.train_days], cfg.svr_window,
                        cfg.svr_epsilon, cfg.svr_c, cfg.svr_epochs, cfg.seed)
        history = max(0, split.test.start - cfg.svr_window + 1)
        pred = predict_svr(model, co2.slice(history, split.test.stop))
    else:
        model = train(train_co2, train_occ, _with_method(cfg.train, method))
        lag_cache.setdefault(split.train_days, model.lag)
        pred = predict(model, co2.slice(split.test.start, split.test.stop)).occupancy
    return _crop(pred, test_occ)


def _with_method(tc: TrainConfig, method: str) -> TrainConfig:
    return replace(tc, method=Method(method))


def run_benchmark(dataset: AlignedPair, cfg: EvalConfig = EvalConfig(), keep_predictions: bool = False,
                  splits=None) -> EvalReport:
    """Score every (split, method) cell; a failing cell is recorded, not raised."""
    if splits is None:
        splits = incremental_splits(dataset, cfg.train.utc_offset, cfg.min_training_days)
    rows, preds = [], []
    for split in splits:
        lag_cache = {}
        for method in cfg.methods:
            try:
                pred, actual = _run_cell(method, dataset, split, cfg, lag_cache)
            except CdhocError as exc:
                log.warning("split %d/%d %s failed: %s", split.train_days, split.test_days, method, exc)
                for tol in cfg.tolerances:
                    rows.append(ReportRow(split.train_days, split.test_days, method, tol,
                                          math.nan, math.nan, str(exc)))
                continue
            mae = float(np.mean(np.abs(pred.values - actual.values)))
            for tol in cfg.tolerances:
                rows.append(ReportRow(split.train_days, split.test_days, method, tol,
                                      accuracy_with_tolerance(pred, actual, tol), mae))
            if keep_predictions:
                preds.append(CellPrediction(split.train_days, method, pred.times, pred.values, actual.values))
    return EvalReport(rows, preds)


def benchmark_from_series(co2: SampledSeries, occ: SampledSeries, cfg: EvalConfig = EvalConfig(),
                          keep_predictions: bool = False, splits: Optional[list] = None) -> EvalReport:
    return run_benchmark(AlignedPair(co2, occ), cfg, keep_predictions, splits)
