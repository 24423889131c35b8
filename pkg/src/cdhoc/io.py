"""Dataset CSV, plot-data export, model files and config files."""

from __future__ import annotations

import configparser
import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .decomp import ComponentSet, Method, StlParams
from .errors import ValidationError
from .gas_sim import Occupancy, OccupantProfile, Schedule
from .harness import EvalConfig
from .lag import RoomGeometry
from .models import PolyModel, SeasonalMap, VacantWindow
from .predictor import OccupancyModel, TrainConfig
from .series import AlignedPair, SampledSeries, Unit, fill_gaps
from .svr import SvrModel

HEADER = ("timestamp", "co2_ppm", "occupancy")
TABLE5_FORMAT = "%d/%m/%Y %I:%M:%S %p"
MODEL_MAGIC = "cdhoc-model-format"
MODEL_VERSION = 1


# -- timestamps ----------------------------------------------------------------

def parse_timestamp(text: str, utc_offset: float = 0.0) -> float:
    """Epoch seconds from ISO-8601 or ``dd/mm/yyyy hh:mm:ss AM``.

    Naive timestamps are read as local time at ``utc_offset`` seconds east of UTC.
    """
    text = text.strip()
    try:
        stamp = dt.datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        stamp = dt.datetime.strptime(text, TABLE5_FORMAT)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=dt.timezone(dt.timedelta(seconds=utc_offset)))
    return stamp.timestamp()


def detect_utc_offset(path) -> Optional[float]:
    """UTC offset in seconds of the first timestamp, if it carries one."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        row = next(reader, None)
    if not row:
        return None
    try:
        stamp = dt.datetime.fromisoformat(row[0].strip().replace("Z", "+00:00"))
    except ValueError:
        return None
    off = stamp.utcoffset()
    return None if off is None else off.total_seconds()


def format_timestamp(t: float, utc_offset: float = 0.0) -> str:
    tz = dt.timezone(dt.timedelta(seconds=utc_offset))
    return dt.datetime.fromtimestamp(t, tz).isoformat()


# -- datasets ------------------------------------------------------------------

def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError("empty file; expected header " + ",".join(HEADER), line=1)
        header = tuple(h.strip().lower() for h in header)
        if header not in (HEADER, HEADER[:2]):
            raise ValidationError(f"expected header {','.join(HEADER)}, got {','.join(header)}", line=1)
        rows = [(reader.line_num, row) for row in reader if any(c.strip() for c in row)]
    if not rows:
        raise ValidationError("no data rows", line=2)
    return len(header) == 3, rows


def _number(text: str, line: int, name: str) -> Optional[float]:
    text = text.strip()
    if text == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"unparseable {name} value {text!r}", line=line) from None
    if not math.isfinite(value):
        raise ValidationError(f"non-finite {name} value", line=line)
    return value


def ingest_csv(path, interval: Optional[int] = None, utc_offset: float = 0.0, max_gap: int = 3):
    """Read ``timestamp,co2_ppm[,occupancy]`` rows onto a regular grid.

    Timestamps must increase strictly. Rows are binned into ``interval``-second
    slots starting at the first timestamp rounded down to the grid; several
    rows in a slot are averaged (occupancy is then rounded), empty slots are
    filled by linear interpolation when at most ``max_gap`` long. Returns an
    :class:`AlignedPair` when occupancy is present, else the CO2 series.
    """
    has_occ, rows = _read_rows(path)
    times, co2, occ = [], [], []
    for line, row in rows:
        if len(row) != (3 if has_occ else 2):
            raise ValidationError(f"expected {3 if has_occ else 2} columns, got {len(row)}", line=line)
        try:
            t = parse_timestamp(row[0], utc_offset)
        except ValueError:
            raise ValidationError(f"unparseable timestamp {row[0]!r}", line=line) from None
        if times and t <= times[-1]:
            kind = "duplicated" if t == times[-1] else "non-monotone"
            raise ValidationError(f"{kind} timestamp {row[0].strip()}", line=line)
        times.append(t)
        co2.append(_number(row[1], line, "co2_ppm"))
        if has_occ:
            v = _number(row[2], line, "occupancy")
            if v is not None and v < 0:
                raise ValidationError("occupancy must be >= 0", line=line)
            occ.append(v)
    t = np.asarray(times)
    if interval is None:
        if len(t) < 2:
            raise ValidationError("cannot infer the sampling interval from one row")
        interval = int(round(float(np.median(np.diff(t)))))
    if interval <= 0:
        raise ValidationError("interval must be positive")
    start = math.floor(t[0] / interval) * interval
    slot = ((t - start) // interval).astype(np.int64)
    n = int(slot[-1]) + 1

    def binned(values, unit, integral):
        vals = np.array([np.nan if v is None else v for v in values])
        ok = ~np.isnan(vals)
        sums = np.bincount(slot[ok], vals[ok], minlength=n)
        counts = np.bincount(slot[ok], minlength=n)
        out = [sums[k] / counts[k] if counts[k] else None for k in range(n)]
        if integral:
            out = [None if v is None else float(np.rint(v)) for v in out]
        series = SampledSeries.from_optional(float(start), interval, out, unit)
        return fill_gaps(series, max_gap) if series.has_missing else series

    co2_series = binned(co2, Unit.PPM, False)
    if not has_occ:
        return co2_series
    occ_series = binned(occ, Unit.PERSONS, True)
    return AlignedPair(co2_series, occ_series.with_values(np.rint(occ_series.values)))


def write_dataset_csv(path, co2: SampledSeries, occ: Optional[SampledSeries] = None, utc_offset: float = 0.0):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER if occ is not None else HEADER[:2])
        for k, t in enumerate(co2.times):
            row = [format_timestamp(t, utc_offset), repr(float(co2.values[k]))]
            if occ is not None:
                row.append(int(occ.values[k]))
            w.writerow(row)


def write_components_csv(path, comps: ComponentSet, utc_offset: float = 0.0):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("timestamp", "trend", "seasonal", "irregular"))
        for t, tr, s, e in comps.rows():
            w.writerow((format_timestamp(t, utc_offset), repr(float(tr)), repr(float(s)), repr(float(e))))


def write_sweep_csv(path, sweep):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("lag", "nrmse", "slope", "intercept"))
        for f in sweep:
            w.writerow((f.lag, repr(f.nrmse), repr(f.slope), repr(f.intercept)))


def write_prediction_csv(path, pred: SampledSeries, actual=None, utc_offset: float = 0.0):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("timestamp", "predicted") + (("actual",) if actual is not None else ()))
        for k, t in enumerate(pred.times):
            row = [format_timestamp(t, utc_offset), int(pred.values[k])]
            if actual is not None:
                row.append(int(actual[k]))
            w.writerow(row)


def write_rows_csv(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


# -- schedule files ------------------------------------------------------------

def read_schedule(path, utc_offset: float = 0.0) -> Schedule:
    """Occupant intervals, one per line: ``start end count [M RQ H W]``.

    ``start`` and ``end`` are ISO-8601 timestamps (naive ones are local at
    ``utc_offset``) or epoch seconds. The optional tail overrides the default
    occupant profile. Blank lines and ``#`` comments are skipped.
    """
    entries = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            fields = line.split("#", 1)[0].split()
            if not fields:
                continue
            if len(fields) not in (3, 7):
                raise ValidationError("expected 'start end count [M RQ H W]'", line=line_no)
            try:
                start, end = (float(f) if _is_number(f) else parse_timestamp(f, utc_offset)
                              for f in fields[:2])
                count = int(fields[2])
                profile = OccupantProfile(*map(float, fields[3:])) if len(fields) == 7 else OccupantProfile()
                entries.append(Occupancy(start, end, count, profile))
            except ValueError as exc:  # includes invalid profiles and counts
                raise ValidationError(str(exc), line=line_no) from None
    return Schedule(entries)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def write_schedule(path, schedule: Schedule, utc_offset: float = 0.0):
    default = OccupantProfile()
    with open(path, "w") as fh:
        fh.write("# start end count [metabolic_rate respiratory_quotient height weight]\n")
        for e in schedule.entries:
            line = f"{format_timestamp(e.start, utc_offset)} {format_timestamp(e.end, utc_offset)} {e.count}"
            if e.profile != default:
                p = e.profile
                line += f" {p.metabolic_rate!r} {p.respiratory_quotient!r} {p.height!r} {p.weight!r}"
            fh.write(line + "\n")


# -- model files ---------------------------------------------------------------

def _floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _parse_floats(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split()], dtype=np.float64)


def _poly_section(m: PolyModel) -> dict:
    return {"coefficients": _floats(m.coefficients), "terms": " ".join(map(str, m.terms)),
            "residual_offset": repr(float(m.residual_offset)), "aic": repr(float(m.aic)),
            "weakly_validated": str(m.weakly_validated).lower(),
            "pcc": "none" if m.pcc is None else repr(float(m.pcc))}


def _read_poly(sec) -> PolyModel:
    pcc = sec["pcc"]
    return PolyModel(tuple(float(v) for v in _parse_floats(sec["coefficients"])),
                     tuple(int(v) for v in sec["terms"].split()), float(sec["residual_offset"]),
                     float(sec["aic"]), sec.getboolean("weakly_validated"),
                     None if pcc == "none" else float(pcc))


def model_to_text(model) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    if isinstance(model, SvrModel):
        cp["model"] = {"kind": "svr"}
        cp["svr"] = {"weights": _floats(model.weights), "bias": repr(float(model.bias)),
                     "epsilon": repr(model.epsilon), "c": repr(model.c), "lag": str(model.lag),
                     "window": str(model.window), "mean": _floats(model.mean), "scale": _floats(model.scale)}
    elif isinstance(model, OccupancyModel):
        cp["model"] = {"kind": "cdhoc", "method": model.method.value, "period": str(model.period),
                       "lag": str(model.lag), "interval": str(model.interval),
                       "henderson_terms": str(model.henderson_terms),
                       "training_start": repr(float(model.training_range[0])),
                       "training_end": repr(float(model.training_range[1])),
                       "seasonal_fallback": str(model.seasonal_fallback).lower()}
        if model.stl is not None:
            s = model.stl
            cp["stl"] = {"period": str(s.period), "seasonal_span": str(s.seasonal_span),
                         "trend_span": str(s.trend_span), "lowpass_span": str(s.lowpass_span),
                         "inner_iterations": str(s.inner_iterations),
                         "outer_iterations": str(s.outer_iterations), "loess_degree": str(s.loess_degree)}
        cp["trend"] = _poly_section(model.trend_model)
        sm = model.seasonal_map
        cp["seasonal"] = {"occupancy_motif": _floats(sm.occupancy_motif), "phase_anchor": str(sm.phase_anchor),
                          "anchor_time": repr(float(sm.anchor_time)), "interval": str(sm.interval)}
        cp["irregular"] = _poly_section(model.irregular_model)
        if model.zpa is not None:
            z = model.zpa
            cp["zpa"] = {"start": repr(float(z.start)), "end": repr(float(z.end)),
                         "min_days_observed": str(z.min_days_observed), "utc_offset": repr(float(z.utc_offset))}
        if model.context is not None:
            c = model.context
            cp["context"] = {"start_time": repr(float(c.start_time)), "interval": str(c.interval),
                             "values": _floats(c.values)}
    else:
        raise ValidationError(f"cannot serialise {type(model).__name__}")
    buf = io.StringIO()
    buf.write(f"{MODEL_MAGIC} {MODEL_VERSION}\n")
    cp.write(buf)
    return buf.getvalue()


def model_from_text(text: str):
    first, _, body = text.partition("\n")
    parts = first.split()
    if len(parts) != 2 or parts[0] != MODEL_MAGIC:
        raise ValidationError(f"not a model file (first line must be '{MODEL_MAGIC} N')", line=1)
    if parts[1] != str(MODEL_VERSION):
        raise ValidationError(f"unsupported model format version {parts[1]}", line=1)
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(body)
        kind = cp["model"]["kind"]
        if kind == "svr":
            s = cp["svr"]
            return SvrModel(_parse_floats(s["weights"]), float(s["bias"]), float(s["epsilon"]), float(s["c"]),
                            int(s["lag"]), int(s["window"]), _parse_floats(s["mean"]), _parse_floats(s["scale"]))
        if kind != "cdhoc":
            raise ValidationError(f"unknown model kind {kind!r}")
        m = cp["model"]
        stl = None
        if cp.has_section("stl"):
            s = cp["stl"]
            stl = StlParams(int(s["period"]), int(s["seasonal_span"]), int(s["trend_span"]),
                            int(s["lowpass_span"]), int(s["inner_iterations"]), int(s["outer_iterations"]),
                            int(s["loess_degree"]))
        sm = cp["seasonal"]
        seasonal = SeasonalMap(_parse_floats(sm["occupancy_motif"]), int(sm["phase_anchor"]),
                               float(sm["anchor_time"]), int(sm["interval"]))
        zpa = None
        if cp.has_section("zpa"):
            z = cp["zpa"]
            zpa = VacantWindow(float(z["start"]), float(z["end"]), int(z["min_days_observed"]),
                               float(z["utc_offset"]))
        context = None
        if cp.has_section("context"):
            c = cp["context"]
            context = SampledSeries(float(c["start_time"]), int(c["interval"]), _parse_floats(c["values"]),
                                    Unit.PPM)
        return OccupancyModel(Method(m["method"]), int(m["period"]), int(m["lag"]), int(m["interval"]),
                              _read_poly(cp["trend"]), seasonal, _read_poly(cp["irregular"]), zpa,
                              (float(m["training_start"]), float(m["training_end"])), int(m["henderson_terms"]),
                              stl, context, m.getboolean("seasonal_fallback"))
    except (KeyError, configparser.Error) as exc:
        raise ValidationError(f"malformed model file: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed model file: {exc}") from exc


def save_model(path, model):
    Path(path).write_text(model_to_text(model))


def load_model(path):
    return model_from_text(Path(path).read_text())


# -- config files --------------------------------------------------------------

def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _floats_list(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_room(text) -> RoomGeometry:
    dims = [float(v) for v in text.lower().replace("x", " ").split()]
    if len(dims) != 3:
        raise ValueError("room must be LENGTHxWIDTHxHEIGHT in metres")
    return RoomGeometry(*dims)


# key -> (target, field, parser); target "train", "stl", "eval" or "run"
CONFIG_KEYS = {
    "method": ("train", "method", lambda v: Method(v.strip().upper())),
    "period": ("train", "period", int),
    "max_lag": ("train", "max_lag", int),
    "room": ("train", "room", parse_room),
    "max_degree": ("train", "max_degree", int),
    "dtw_threshold": ("train", "dtw_threshold", float),
    "pcc_threshold": ("train", "pcc_threshold", float),
    "trend_target": ("train", "trend_target", str.strip),
    "term_selection": ("train", "term_selection", str.strip),
    "motif_tolerance": ("train", "motif_tolerance", float),
    "motif_min_length": ("train", "motif_min_length", int),
    "henderson_terms": ("train", "henderson_terms", int),
    "utc_offset": ("train", "utc_offset", float),
    "zpa": ("train", "zpa", _bool),
    "context_periods": ("train", "context_periods", int),
    "stl_seasonal_span": ("stl", "seasonal_span", int),
    "stl_trend_span": ("stl", "trend_span", int),
    "stl_lowpass_span": ("stl", "lowpass_span", int),
    "stl_inner_iterations": ("stl", "inner_iterations", int),
    "stl_outer_iterations": ("stl", "outer_iterations", int),
    "stl_loess_degree": ("stl", "loess_degree", int),
    "tolerances": ("eval", "tolerances", _floats_list),
    "methods": ("eval", "methods", lambda v: tuple(v.replace(",", " ").split())),
    "min_training_days": ("eval", "min_training_days", int),
    "svr_window": ("eval", "svr_window", int),
    "svr_epsilon": ("eval", "svr_epsilon", float),
    "svr_c": ("eval", "svr_c", float),
    "svr_epochs": ("eval", "svr_epochs", int),
    "seeds": ("run", "seeds", _ints),
    "interval": ("run", "interval", int),
    "max_gap": ("run", "max_gap", int),
}


@dataclass(frozen=True)
class RunConfig:
    """Every tunable knob, as read from a key-value config file."""

    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seeds: tuple = (0,)
    interval: Optional[int] = None
    max_gap: int = 3
    explicit: frozenset = frozenset()  # keys present in the file

    def eval_config(self, seed: int) -> EvalConfig:
        return replace(self.eval, train=self.train, seed=seed)


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines; an optional ``[cdhoc]`` header is allowed."""
    if not text.lstrip().startswith("["):
        text = "[cdhoc]\n" + text
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed config: {exc}") from exc
    if cp.sections() != ["cdhoc"]:
        raise ValidationError(f"config must hold a single [cdhoc] section, found {cp.sections()}")
    parts = {"train": {}, "stl": {}, "eval": {}, "run": {}}
    for key, raw in cp["cdhoc"].items():
        if key not in CONFIG_KEYS:
            raise ValidationError(f"unknown config key {key!r}")
        target, name, parse = CONFIG_KEYS[key]
        try:
            parts[target][name] = parse(raw)
        except ValueError as exc:
            raise ValidationError(f"bad value for {key}: {exc}") from None
    try:
        if parts["stl"]:
            # the period is filled in at training time
            parts["train"]["stl"] = StlParams(parts["train"].get("period", 288), **parts["stl"])
        train_cfg = TrainConfig(**parts["train"])
        eval_cfg = EvalConfig(train=train_cfg, **parts["eval"])
        run = RunConfig(train_cfg, eval_cfg, **parts["run"], explicit=frozenset(cp["cdhoc"]))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"invalid config: {exc}") from None
    if not run.seeds:
        raise ValidationError("seeds must not be empty")
    if run.max_gap < 0 or (run.interval is not None and run.interval <= 0):
        raise ValidationError("max_gap must be >= 0 and interval > 0")
    return run


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())
