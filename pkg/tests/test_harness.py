import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdhoc.errors import ValidationError
from cdhoc.harness import (EvalConfig, ReportRow, EvalReport, accuracy_with_tolerance, incremental_splits,
                           run_benchmark)
from cdhoc.predictor import TrainConfig
from cdhoc.series import DAY, AlignedPair, Unit

from conftest import make_series


def pair_of_days(days, interval=3600, start=0.0):
    n = int(days * DAY // interval)
    return AlignedPair(make_series(np.full(n, 400.0), interval, start, Unit.PPM),
                       make_series(np.zeros(n), interval, start, Unit.PERSONS))


def test_accuracy_worked_example():
    actual = make_series([150.0, 150.0, 150.0])
    assert accuracy_with_tolerance(make_series([146.0, 155.0, 139.0]), actual, 10) == pytest.approx(200 / 3)
    assert accuracy_with_tolerance([146.0], [150.0], 10) == 100.0
    assert accuracy_with_tolerance([155.0], [150.0], 10) == 100.0


def test_accuracy_boundaries():
    a = np.array([0.0, 3.0, 7.0, 1.0])
    assert accuracy_with_tolerance(a, a, 0) == 100.0
    assert accuracy_with_tolerance(a + 2, a, 2) == 100.0
    assert accuracy_with_tolerance(a + 3, a, 2) == 0.0
    assert accuracy_with_tolerance(a - 3, a, 2) == 0.0


@pytest.mark.parametrize("pred,actual,x", [([1.0], [1.0, 2.0], 0), ([], [], 0), ([1.0], [1.0], -1)])
def test_accuracy_input_checks(pred, actual, x):
    with pytest.raises(ValidationError):
        accuracy_with_tolerance(pred, actual, x)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 300), st.integers(0, 300)), min_size=1, max_size=60),
       st.floats(0, 50), st.floats(0, 50))
def test_accuracy_monotone_in_tolerance(pairs, x1, x2):
    pred, actual = (np.array(v, dtype=float) for v in zip(*pairs))
    lo, hi = sorted((x1, x2))
    acc_lo = accuracy_with_tolerance(pred, actual, lo)
    acc_hi = accuracy_with_tolerance(pred, actual, hi)
    assert 0.0 <= acc_lo <= acc_hi <= 100.0


@pytest.mark.parametrize("days,first", [(14, (7, 7)), (23, (12, 11)), (2, (1, 1)), (3, (2, 1))])
def test_incremental_splits_tables(days, first):
    splits = incremental_splits(pair_of_days(days))
    table = [(s.train_days, s.test_days) for s in splits]
    assert table[0] == first and table[-1] == (days - 1, 1)
    assert table == [(k, days - k) for k in range(first[0], days)]


def test_splits_cover_whole_days():
    data = pair_of_days(14, 300)
    for s in incremental_splits(data):
        assert s.train.start == 0 and s.train.stop == s.test.start == s.train_days * 288
        assert s.test.stop == 14 * 288


def test_splits_start_at_local_midnight():
    utc_offset = 36000.0
    # starts at 18:00 local; the partial first day and a trailing partial day are ignored
    start = -utc_offset + 18 * 3600
    data = pair_of_days(4.5, 3600, start)
    splits = incremental_splits(data, utc_offset)
    assert [(s.train_days, s.test_days) for s in splits] == [(2, 2), (3, 1)]
    t0 = data.co2.times[splits[0].train.start]
    assert (t0 + utc_offset) % DAY == 0
    assert splits[-1].test.stop - splits[0].train.start == 4 * 24


def test_splits_min_training_days_and_errors():
    splits = incremental_splits(pair_of_days(14), min_training_days=10)
    assert [s.train_days for s in splits] == [10, 11, 12, 13]
    with pytest.raises(ValidationError):
        incremental_splits(pair_of_days(1.9))


def test_eval_config_validation():
    with pytest.raises(ValidationError):
        EvalConfig(tolerances=(-1,))
    with pytest.raises(ValidationError):
        EvalConfig(min_training_days=0)
    with pytest.raises(ValidationError):
        EvalConfig(methods=("STD", "ARIMA"))
    assert EvalConfig(methods=("std", "svr")).methods == ("STD", "SVR")


@pytest.fixture(scope="module")
def office6(office_data):
    p, co2, occ = office_data
    n = 6 * DAY // p.interval
    return p, AlignedPair(co2.slice(0, n), occ.slice(0, n))


@pytest.fixture(scope="module")
def report6(office6):
    p, data = office6
    cfg = EvalConfig(tolerances=(0, 1), train=TrainConfig(utc_offset=p.utc_offset))
    return run_benchmark(data, cfg, keep_predictions=True), cfg


def test_benchmark_report_shape(report6):
    report, _ = report6
    assert len(report.rows) == 3 * 3 * 2  # splits x methods x tolerances
    assert not report.failures()
    assert all(0.0 <= r.accuracy <= 100.0 for r in report.rows)
    assert {(r.train_days, r.test_days) for r in report.rows} == {(3, 3), (4, 2), (5, 1)}
    assert len(report.predictions) == 9
    for cell in report.predictions:
        assert len(cell.predicted) == len(cell.actual) == len(cell.times)


def test_benchmark_averages_match_rows(report6):
    report, _ = report6
    avg = report.averages()
    assert set(avg) == {(m, t) for m in ("STD", "STL", "SVR") for t in (0, 1)}
    for (method, tol), value in avg.items():
        rows = [r.accuracy for r in report.rows if r.method == method and r.tolerance == tol]
        assert abs(value - sum(rows) / len(rows)) <= 1e-9


def test_benchmark_is_reproducible(office6, report6):
    _, data = office6
    report, cfg = report6
    again = run_benchmark(data, cfg)
    assert again.rows == report.rows


def test_prediction_cells_rescore_to_rows(report6):
    report, _ = report6
    rows = {(r.train_days, r.method, r.tolerance): r.accuracy for r in report.rows}
    for cell in report.predictions:
        for tol in (0, 1):
            assert accuracy_with_tolerance(cell.predicted, cell.actual, tol) == rows[(cell.train_days,
                                                                                     cell.method, tol)]


def test_single_method_single_split(office6):
    p, data = office6
    split = incremental_splits(data, p.utc_offset)[-1:]
    cfg = EvalConfig(tolerances=(1,), methods=("STD",), train=TrainConfig(utc_offset=p.utc_offset))
    report = run_benchmark(data, cfg, splits=split)
    assert len(report.rows) == 1
    assert report.rows[0].train_days == 5 and report.rows[0].method == "STD"


def test_failing_cells_are_recorded_not_raised(office6):
    p, data = office6
    occ = data.occupancy.values.copy()
    occ[: 3 * DAY // p.interval] = 0.0  # the first training span is idle, so its lag sweep is undefined
    idle = AlignedPair(data.co2, data.occupancy.with_values(occ))
    cfg = EvalConfig(tolerances=(0,), train=TrainConfig(utc_offset=p.utc_offset))
    report = run_benchmark(idle, cfg)
    assert {(r.train_days, r.method) for r in report.failures()} == {(3, m) for m in ("STD", "STL", "SVR")}
    assert all(math.isnan(r.accuracy) and "constant" in r.error for r in report.failures())
    ran = [r for r in report.rows if not r.error]
    assert len(ran) == 6 and all(0.0 <= r.accuracy <= 100.0 for r in ran)
    for (method, _), value in report.averages().items():
        assert value == pytest.approx(np.mean([r.accuracy for r in ran if r.method == method]))


def test_report_table_and_csv():
    rows = [ReportRow(1, 1, "STD", 0, 50.0, 0.5), ReportRow(1, 1, "SVR", 0, math.nan, math.nan, "boom")]
    report = EvalReport(rows)
    text = report.table()
    assert "STD@0" in text and "SVR@0" in text and "50.00" in text
    lines = text.splitlines()
    assert lines[1].split() == ["1", "1", "50.00", "-"]
    assert lines[-1].split() == ["avg", "50.00", "-"]
    csv_rows = list(report.csv_rows())
    assert csv_rows[0][0] == "train_days"
    assert csv_rows[2][-1] == "boom"
    assert csv_rows[-1][:2] == ("average", "")
