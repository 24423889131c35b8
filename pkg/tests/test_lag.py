import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdhoc.errors import ConstantOccupancyError, NoVarianceError, ValidationError
from cdhoc.lag import (LagFit, RoomGeometry, fit_line, minutes_to_samples, nrmse, select_lag,
                       upper_bound_lag)
from cdhoc.series import AlignedPair

from conftest import make_series


def pair(c, o):
    return AlignedPair(make_series(c), make_series(o))


def test_upper_bound_examples():
    assert upper_bound_lag(RoomGeometry(30, 20, 10)) == 60
    assert upper_bound_lag(RoomGeometry(10, 10, 10)) == 10
    assert upper_bound_lag(RoomGeometry(3, 4, 5)) == 0


def test_geometry_validation():
    with pytest.raises(ValidationError):
        RoomGeometry(0, 1, 1)


def test_minutes_to_samples_rounds_down():
    assert minutes_to_samples(60, 180) == 20
    assert minutes_to_samples(7, 300) == 1
    assert minutes_to_samples(4, 300) == 0


def test_fit_line_exact():
    f = fit_line(pair([400, 500, 400, 500], [0, 1, 0, 1]))
    assert f.slope == pytest.approx(0.01, abs=1e-15)
    assert f.intercept == pytest.approx(-4.0, abs=1e-12)


def test_fit_line_flat_occupancy():
    f = fit_line(pair([400, 430, 410], [2, 2, 2]))
    assert f.slope == 0.0 and f.intercept == 2.0


def test_fit_line_no_variance():
    with pytest.raises(NoVarianceError):
        fit_line(pair([400, 400, 400], [0, 1, 2]))


def test_fit_line_normal_equations(rng):
    for _ in range(20):
        c = rng.uniform(350, 900, 50)
        o = rng.integers(0, 5, 50).astype(float)
        f = fit_line(pair(c, o))
        a = np.column_stack([c, np.ones_like(c)])
        slope, intercept = np.linalg.solve(a.T @ a, a.T @ o)
        assert f.slope == pytest.approx(slope, rel=1e-10, abs=1e-10)
        assert f.intercept == pytest.approx(intercept, rel=1e-10, abs=1e-10)


def test_nrmse_examples():
    p = pair([400, 500, 600, 700, 800], [0, 1, 2, 3, 4])
    assert nrmse(fit_line(p), p) == pytest.approx(0.0, abs=1e-12)
    shifted = LagFit(0, 0.01, -3.0)  # one person too high everywhere, range 4
    assert nrmse(shifted, p) == pytest.approx(0.25, abs=1e-12)


def test_nrmse_direct_oracle(rng):
    c = rng.uniform(400, 800, 40)
    o = rng.integers(0, 6, 40).astype(float)
    p = pair(c, o)
    f = fit_line(p)
    resid = o - (f.slope * c + f.intercept)
    oracle = math.sqrt(sum(r * r for r in resid) / len(o)) / (max(o) - min(o))
    assert nrmse(f, p) == pytest.approx(oracle, abs=1e-12)


def test_nrmse_constant_occupancy():
    p = pair([400, 500, 450], [1, 1, 1])
    with pytest.raises(ConstantOccupancyError):
        nrmse(fit_line(p), p)


@given(st.floats(-500, 500))
def test_nrmse_invariant_under_co2_offset(k):
    rng = np.random.default_rng(3)
    c = rng.uniform(400, 800, 30)
    o = rng.integers(0, 4, 30).astype(float)
    o[0], o[1] = 0.0, 3.0
    p1 = pair(c, o)
    p2 = pair(c + k, o)
    assert nrmse(fit_line(p2), p2) == pytest.approx(nrmse(fit_line(p1), p1), rel=1e-7, abs=1e-9)


def _shifted(occ, lag):
    co2 = 100.0 * occ + 400.0
    return make_series(np.concatenate([np.full(lag, 400.0), co2])), make_series(occ)


def test_select_lag_ub_zero(rng):
    occ = rng.integers(0, 4, 100).astype(float)
    lag, sweep = select_lag(*_shifted(occ, 3), 0)
    assert lag == 0 and len(sweep) == 1


def test_select_lag_recovers_five(rng):
    occ = rng.integers(0, 4, 200).astype(float)
    lag, sweep = select_lag(*_shifted(occ, 5), 10)
    assert lag == 5
    assert [f.lag for f in sweep] == list(range(11))
    assert all(sweep[5].nrmse <= f.nrmse for f in sweep)


def test_select_lag_no_shift_has_zero_error(rng):
    occ = rng.integers(0, 4, 200).astype(float)
    lag, sweep = select_lag(*_shifted(occ, 0), 5)
    assert lag == 0 and sweep[0].nrmse == pytest.approx(0.0, abs=1e-12)


def test_select_lag_ties_prefer_smallest():
    occ = np.tile([0.0, 1.0], 20)
    co2 = 100 * occ + 400  # period-2 signal: lags 0 and 2 fit equally well
    lag, sweep = select_lag(make_series(co2), make_series(occ), 2)
    assert sweep[0].nrmse == sweep[2].nrmse and lag == 0


def test_select_lag_names_failing_lag():
    co2 = make_series([400.0, 400.0, 500.0, 600.0])
    occ = make_series([0.0, 1.0, 2.0, 3.0])
    with pytest.raises(ValidationError, match="lag 3"):
        select_lag(co2, occ, 3)


def test_select_lag_rejects_negative_bound():
    with pytest.raises(ValidationError):
        select_lag(make_series([1, 2]), make_series([1, 2]), -1)
