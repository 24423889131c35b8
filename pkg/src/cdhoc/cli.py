"""Command-line entry point: ``cdhoc <subcommand> ...``.

Exit codes: 0 on success, 1 for invalid input or configuration, 2 when a
training or evaluation stage fails. ``evaluate`` writes its report even when
some cells fail and then exits with 2.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .decomp import Method, decompose
from .errors import ModelError, ValidationError
from .gas_sim import PRESETS, SensorNoise, preset, simulate
from .harness import run_benchmark
from .lag import select_lag
from .predictor import OccupancyModel, predict, train
from .series import DAY, AlignedPair, SampledSeries
from .svr import SvrModel, fit_svr, predict_svr

log = logging.getLogger("cdhoc")


def _config(args) -> io.RunConfig:
    cfg = io.load_config(args.config) if args.config else io.RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if getattr(args, "tolerance", None):
        cfg = replace(cfg, eval=replace(cfg.eval, tolerances=tuple(args.tolerance)))
    offset = args.utc_offset
    if offset is None and "utc_offset" not in cfg.explicit and getattr(args, "input", None):
        offset = io.detect_utc_offset(args.input)
    if offset is not None:
        cfg = replace(cfg, train=replace(cfg.train, utc_offset=offset))
    return cfg


def _read(path, cfg: io.RunConfig, need_occupancy: bool):
    data = io.ingest_csv(path, cfg.interval, cfg.train.utc_offset, cfg.max_gap)
    if need_occupancy and not isinstance(data, AlignedPair):
        raise ValidationError(f"{path}: an occupancy column is required")
    return data


def _co2(data) -> SampledSeries:
    return data.co2 if isinstance(data, AlignedPair) else data


def cmd_simulate(args, cfg):
    p = preset(args.preset)
    if args.days is not None:
        p = replace(p, days=args.days)
    if args.interval is not None:
        p = replace(p, interval=args.interval)
    if args.max_occupants is not None:
        p = replace(p, max_occupants=args.max_occupants)
    if args.room is not None or args.ach is not None:
        geom = io.parse_room(args.room) if args.room is not None else p.room.geometry
        ach = args.ach if args.ach is not None else p.room.inflow * 3600.0 / p.room.volume
        flow = geom.volume * ach / 3600.0
        p = replace(p, room=replace(p.room, geometry=geom, inflow=flow, outflow=flow))
    seed = cfg.seeds[0]
    if args.schedule is None:
        sched = p.schedule(seed)
        start, days = p.start_time, p.days
    else:
        sched = io.read_schedule(args.schedule, p.utc_offset)
        if not sched.entries:
            raise ValidationError(f"{args.schedule}: no schedule entries")
        first = min(e.start for e in sched.entries)
        start = math.floor((first + p.utc_offset) / DAY) * DAY - p.utc_offset
        last = max(e.end for e in sched.entries)
        days = args.days if args.days is not None else max(1, math.ceil((last - start) / DAY))
    if args.write_schedule:
        io.write_schedule(args.write_schedule, sched, p.utc_offset)
    noise = None if args.no_noise else SensorNoise(p.noise_sigma, p.noise_quantization, seed)
    co2, occ = simulate(p.room, sched, p.interval, days * DAY, noise, start)
    io.write_dataset_csv(args.output, co2, occ, p.utc_offset)
    print(f"{args.output}: {len(co2)} samples at {p.interval}s, {days} days, utc_offset={p.utc_offset:g}s")


def cmd_decompose(args, cfg):
    series = _co2(_read(args.input, cfg, False))
    if args.column == "occupancy":
        series = _read(args.input, cfg, True).occupancy
    tc = cfg.train
    period = tc.resolve_period(series.interval)
    stl = tc.stl_params(period) if tc.method is Method.STL else None
    comps = decompose(series, tc.method, period, tc.henderson_terms, stl)
    io.write_components_csv(args.output, comps, tc.utc_offset)
    print(f"{args.output}: {tc.method.value} components, period {period}")


def cmd_lagsweep(args, cfg):
    pair = _read(args.input, cfg, True)
    ub = cfg.train.resolve_max_lag(pair.interval) if args.max_lag is None else args.max_lag
    lag, sweep = select_lag(pair.co2, pair.occupancy, ub)
    io.write_sweep_csv(args.output, sweep)
    print(f"{args.output}: best lag {lag} samples over 0..{ub}")


def cmd_train(args, cfg):
    pair = _read(args.input, cfg, True)
    if args.method == "SVR":
        ev = cfg.eval
        lag, _ = select_lag(pair.co2, pair.occupancy, cfg.train.resolve_max_lag(pair.interval))
        model = fit_svr(pair.co2, pair.occupancy, lag, ev.svr_window, ev.svr_epsilon, ev.svr_c,
                        ev.svr_epochs, cfg.seeds[0])
    else:
        tc = cfg.train if args.method is None else replace(cfg.train, method=Method(args.method))
        model = train(pair.co2, pair.occupancy, tc)
    io.save_model(args.model, model)
    kind = "SVR" if isinstance(model, SvrModel) else model.method.value
    print(f"{args.model}: {kind} model, lag {model.lag}")


def cmd_predict(args, cfg):
    model = io.load_model(args.model)
    data = _read(args.input, cfg, False)
    co2 = _co2(data)
    if isinstance(model, OccupancyModel):
        pred = predict(model, co2).occupancy
    else:
        pred = predict_svr(model, co2)
    actual = None
    if isinstance(data, AlignedPair):
        occ = data.occupancy
        actual = occ.values[occ.index_of(pred.start_time):][:len(pred)]
    io.write_prediction_csv(args.output, pred, actual, cfg.train.utc_offset)
    print(f"{args.output}: {len(pred)} predictions")


def cmd_evaluate(args, cfg):
    pair = _read(args.input, cfg, True)
    out = Path(args.output)
    failed = False
    for seed in cfg.seeds:
        report = run_benchmark(pair, cfg.eval_config(seed), keep_predictions=args.predictions is not None)
        stem = out if len(cfg.seeds) == 1 else out.with_name(f"{out.stem}_seed{seed}{out.suffix}")
        io.write_rows_csv(stem, report.csv_rows())
        if args.predictions is not None:
            pdir = Path(args.predictions)
            pdir.mkdir(parents=True, exist_ok=True)
            for cell in report.predictions:
                name = pdir / f"seed{seed}_train{cell.train_days}_{cell.method}.csv"
                series = SampledSeries(cell.times[0], pair.interval, cell.predicted)
                io.write_prediction_csv(name, series, cell.actual, cfg.train.utc_offset)
        print(f"seed {seed} -> {stem}")
        print(report.table())
        if report.failures():
            failed = True
            print(f"{len(report.failures())} cell(s) failed; see the error column", file=sys.stderr)
    return 2 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value config file")
    common.add_argument("--seed", type=int, help="override the configured seeds with one seed")
    common.add_argument("--utc-offset", type=float, help="local time offset in seconds east of UTC")
    common.add_argument("-v", "--verbose", action="store_true", help="log warnings from the pipeline")

    parser = argparse.ArgumentParser(prog="cdhoc", description="CO2-driven occupancy estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic dataset CSV")
    p.add_argument("--preset", choices=sorted(PRESETS), default="office")
    p.add_argument("--days", type=int, help="override the preset length")
    p.add_argument("--no-noise", action="store_true", help="disable sensor noise")
    p.add_argument("--room", help="custom room LENGTHxWIDTHxHEIGHT in metres")
    p.add_argument("--ach", type=float, help="custom ventilation in air changes per hour")
    p.add_argument("--interval", type=int, help="custom sampling interval in seconds")
    p.add_argument("--max-occupants", type=int, help="custom occupant cap")
    p.add_argument("--schedule", help="plain-text occupant interval list to simulate instead of the preset's")
    p.add_argument("--write-schedule", help="also write the simulated schedule as an interval list")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decompose", parents=[common], help="write trend/seasonal/irregular CSV")
    p.add_argument("input")
    p.add_argument("--column", choices=("co2", "occupancy"), default="co2")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("lagsweep", parents=[common], help="write the NRMSE-versus-lag curve CSV")
    p.add_argument("input")
    p.add_argument("--max-lag", type=int, help="largest lag in samples")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_lagsweep)

    p = sub.add_parser("train", parents=[common], help="fit a model and save it")
    p.add_argument("input")
    p.add_argument("--method", type=str.upper, choices=("STD", "STL", "SVR"))
    p.add_argument("-m", "--model", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict occupancy from CO2")
    p.add_argument("input")
    p.add_argument("-m", "--model", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="run the incremental-split benchmark")
    p.add_argument("input")
    p.add_argument("--tolerance", type=float, action="append", help="tolerance in persons; repeatable")
    p.add_argument("-o", "--output", required=True, help="report CSV")
    p.add_argument("--predictions", help="directory for per-cell prediction CSVs")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; a bad command line is invalid input
        return 1 if exc.code == 2 else exc.code
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        code = args.func(args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ModelError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 2
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
