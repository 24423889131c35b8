import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdhoc.decomp import (ComponentSet, Method, StlParams, decompose, decompose_std, decompose_stl,
                          henderson, henderson_weights, loess, ma_weights, moving_average)
from cdhoc.errors import DegenerateNeighborhoodError, ValidationError
from cdhoc.series import Unit

from conftest import make_series


def henderson_closed_form(terms):
    n = (terms + 3) // 2
    j = np.arange(-(terms // 2), terms // 2 + 1, dtype=np.float64)
    num = 315 * ((n - 1) ** 2 - j**2) * (n**2 - j**2) * ((n + 1) ** 2 - j**2) * (3 * n**2 - 16 - 11 * j**2)
    den = 8 * n * (n**2 - 1) * (4 * n**2 - 1) * (4 * n**2 - 9) * (4 * n**2 - 25)
    return num / den


def wls_oracle(xs, ys, x0, span, degree, rw):
    """Per-point weighted least squares written from the definition."""
    d = np.abs(xs - x0)
    q = min(span, len(xs))
    idx = np.argsort(d, kind="stable")[:q]
    h = d[idx].max()
    u = d / h
    w = np.where(u < 1, (1 - u**3) ** 3, 0.0) * rw
    a = np.column_stack([(xs - x0) ** k for k in range(degree + 1)])
    sel = np.zeros(len(xs), bool)
    sel[idx] = True
    wa = a[sel] * w[sel, None]
    beta = np.linalg.solve(a[sel].T @ wa, wa.T @ ys[sel])
    return beta[0]


# moving averages and Henderson

def test_ma_constant_and_linear():
    s = make_series(np.full(40, 7.0))
    assert np.allclose(moving_average(s, 2, 12).values, 7.0)
    ramp = make_series(3.0 * np.arange(40) + 2)
    out = moving_average(ramp, 2, 12).values
    assert np.allclose(out[7:33], ramp.values[7:33], atol=1e-12)


def test_ma_nested_window_oracle(rng):
    v = rng.normal(size=30)
    out = moving_average(make_series(v), 2, 12).values
    for i in range(7, 23):
        inner = [np.mean(v[k - 6:k + 6]) for k in (i, i + 1)]  # 12-term means centred on i-0.5, i+0.5
        assert out[i] == pytest.approx(np.mean(inner), abs=1e-12)


def test_ma_symmetric_endpoints():
    v = np.arange(20.0) ** 2
    out = moving_average(make_series(v), 1, 5).values
    assert out[0] == v[0]
    assert out[1] == pytest.approx(np.mean(v[0:3]))


def test_ma_rejects_short_and_even():
    with pytest.raises(ValidationError):
        moving_average(make_series(np.ones(10)), 2, 12)
    with pytest.raises(ValidationError):
        ma_weights(2, 3)


@pytest.mark.parametrize("terms", [5, 9, 13, 23])
def test_henderson_weights_closed_form(terms):
    w = henderson_weights(terms)
    assert np.allclose(w, henderson_closed_form(terms), rtol=0, atol=1e-12)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


def test_henderson_13_known_centre():
    assert henderson_weights(13)[6] == pytest.approx(0.24006, abs=5e-6)


def test_henderson_passes_cubics():
    t = np.arange(60.0)
    v = 0.001 * t**3 - 0.05 * t**2 + t + 3
    out = henderson(make_series(v), 13).values
    assert np.allclose(out[6:54], v[6:54], atol=1e-9)
    assert np.allclose(henderson(make_series(np.full(30, 2.0)), 13).values, 2.0)


def test_henderson_rejects_unsupported():
    with pytest.raises(ValidationError):
        henderson(make_series(np.ones(40)), 11)
    with pytest.raises(ValidationError):
        henderson(make_series(np.ones(10)), 13)


# STD

def _sine_ramp(n, p, slope=0.0, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(n)
    season = np.sin(2 * np.pi * t / p)
    return season, slope * t + season + rng.normal(0, noise, n)


def test_std_pure_sine():
    season, y = _sine_ramp(24 * 10, 24)
    c = decompose_std(make_series(y), 24)
    assert np.sqrt(np.mean((c.seasonal.values - season) ** 2)) <= 0.05
    # shrinking end windows leak some of the edge cycles into the trend
    assert np.sqrt(np.mean(c.trend.values**2)) <= 0.1
    assert np.sqrt(np.mean(c.irregular.values**2)) <= 0.05


def test_std_constant():
    c = decompose_std(make_series(np.full(100, 5.0)), 12)
    assert np.allclose(c.trend.values, 5.0, atol=1e-9)
    assert np.allclose(c.seasonal.values, 0.0, atol=1e-9)
    assert np.allclose(c.irregular.values, 0.0, atol=1e-9)


def test_std_ramp_slope():
    _, y = _sine_ramp(24 * 12, 24, slope=0.05)
    tr = decompose_std(make_series(y), 24).trend.values
    lo, hi = 24, len(y) - 24
    slope = np.polyfit(np.arange(lo, hi), tr[lo:hi], 1)[0]
    assert slope == pytest.approx(0.05, rel=0.05)


def test_std_centred_per_phase():
    _, y = _sine_ramp(24 * 9, 24, slope=0.02, noise=0.3, seed=4)
    s = decompose_std(make_series(y), 24).seasonal.values
    blocks = s.reshape(9, 24)
    assert np.allclose(blocks.sum(axis=1), 0.0, atol=1e-6)


def test_std_errors():
    with pytest.raises(ValidationError):
        decompose_std(make_series(np.ones(30)), 12)
    with pytest.raises(ValidationError):
        decompose_std(make_series(np.ones(30)), 1)


def test_std_on_occupancy_counts():
    occ = np.tile([0, 0, 1, 3, 2, 0], 10).astype(float)
    c = decompose_std(make_series(occ, unit=Unit.PERSONS), 6)
    assert c.trend.unit is Unit.DIMENSIONLESS


# loess

def test_loess_reproduces_lines_and_quadratics():
    xs = np.arange(30.0)
    assert np.allclose(loess(xs, 2 * xs - 1, 5, 1), 2 * xs - 1, atol=1e-9)
    q = 0.3 * xs**2 - xs + 4
    assert np.allclose(loess(xs, q, 7, 2), q, atol=1e-9)


def test_loess_matches_wls_oracle(rng):
    xs = np.arange(40.0)
    ys = np.sin(xs / 4) + rng.normal(0, 0.2, 40)
    rw = rng.uniform(0.2, 1.0, 40)
    for degree in (1, 2):
        fit = loess(xs, ys, 7, degree, rw)
        for i, x0 in enumerate(xs):
            assert fit[i] == pytest.approx(wls_oracle(xs, ys, x0, 7, degree, rw), abs=1e-10)


def test_loess_errors():
    xs = np.arange(10.0)
    with pytest.raises(ValidationError):
        loess(xs, xs, 2, 1)
    with pytest.raises(ValidationError):
        loess(xs[::-1], xs, 5, 1)
    rw = np.zeros(10)
    rw[3] = 1.0
    with pytest.raises(DegenerateNeighborhoodError):
        loess(xs, xs, 5, 1, rw)


def test_robust_loess_widens_past_rejected_points():
    from cdhoc.decomp import _robust_loess_at

    xs = np.arange(20.0)
    ys = 2.0 * xs + 1.0
    ys[10] = 1000.0
    rw = np.ones(20)
    rw[8:13] = 0.0  # a run of rejected points around the outlier leaves span-5 fits singular
    fit = _robust_loess_at(xs, ys, xs, 5, 1, rw)
    assert np.allclose(fit, 2.0 * xs + 1.0, rtol=0, atol=1e-9)
    # with nothing left to fit, distance weights alone are used
    flat = _robust_loess_at(xs, np.full(20, 3.0), xs, 5, 1, np.zeros(20))
    assert np.allclose(flat, 3.0)


# STL

def test_stl_params_defaults():
    p = StlParams(24)
    assert (p.seasonal_span, p.inner_iterations, p.outer_iterations, p.loess_degree) == (7, 2, 1, 1)
    assert p.trend_span == 47  # next odd above 36 / (1 - 1.5 / 7) = 45.8
    assert p.lowpass_span == 25


@pytest.mark.parametrize("kw", [dict(seasonal_span=6), dict(seasonal_span=1), dict(inner_iterations=0),
                                dict(outer_iterations=-1), dict(loess_degree=3), dict(trend_span=4)])
def test_stl_params_validation(kw):
    with pytest.raises(ValidationError):
        StlParams(24, **kw)


def test_stl_constant():
    c = decompose_stl(make_series(np.full(120, 3.0)), StlParams(12))
    assert np.allclose(c.seasonal.values, 0.0, atol=1e-9)
    assert np.allclose(c.irregular.values, 0.0, atol=1e-9)


def test_stl_sine_ramp():
    season, y = _sine_ramp(24 * 12, 24, slope=0.05)
    c = decompose_stl(make_series(y), StlParams(24))
    ramp = 0.05 * np.arange(len(y))
    inner = slice(24, len(y) - 24)
    assert np.sqrt(np.mean((c.seasonal.values - season) ** 2)) <= 0.05
    assert np.sqrt(np.mean((c.trend.values[inner] - ramp[inner]) ** 2)) <= 0.05 * np.ptp(ramp)


def test_stl_outliers_are_absorbed_by_irregular():
    season, y = _sine_ramp(24 * 12, 24, slope=0.02, noise=0.1, seed=7)
    clean = decompose_stl(make_series(y), StlParams(24, outer_iterations=2)).trend.values
    spiky = y.copy()
    pos = [50, 130, 200]
    spiky[pos] += 10.0
    trend = decompose_stl(make_series(spiky), StlParams(24, outer_iterations=2)).trend.values
    true = 0.02 * np.arange(len(y))
    base = np.mean(np.abs(clean - true))
    assert np.max(np.abs(trend[pos] - true[pos])) < 3 * max(base, 1e-3) + 0.1


def test_stl_too_short():
    with pytest.raises(ValidationError):
        decompose_stl(make_series(np.ones(30)), StlParams(24))


def test_stl_survives_sparse_occupancy():
    occ = np.zeros(24 * 10)
    occ[9::24] = 1.0  # one busy sample per day: robustness weights zero whole neighbourhoods
    occ[10::48] = 4.0
    c = decompose_stl(make_series(occ, unit=Unit.PERSONS), StlParams(24))
    assert np.all(np.isfinite(c.trend.values))


# shared invariants

series_strategy = st.tuples(st.integers(3, 8), st.integers(5, 30), st.integers(0, 2**31 - 1))


@settings(max_examples=30, deadline=None)
@given(series_strategy, st.sampled_from(["STD", "STL"]))
def test_reconstruction_exact(shape, method):
    cycles, p, seed = shape
    rng = np.random.default_rng(seed)
    y = rng.normal(0, 50, cycles * p) + 400
    c = decompose(make_series(y), method, p)
    assert np.allclose(c.total(), y, rtol=1e-9, atol=0)
    assert len(c.trend) == len(c.seasonal) == len(c.irregular) == len(y)
    assert c.trend.start_time == 0.0 and c.seasonal.interval == 300


@settings(max_examples=20, deadline=None)
@given(series_strategy, st.sampled_from(["STD", "STL"]), st.floats(-1e3, 1e3))
def test_constant_shift_moves_trend_only(shape, method, k):
    cycles, p, seed = shape
    rng = np.random.default_rng(seed)
    y = rng.normal(0, 10, cycles * p)
    a = decompose(make_series(y), method, p)
    b = decompose(make_series(y + k), method, p)
    assert np.allclose(b.trend.values, a.trend.values + k, atol=1e-6)
    assert np.allclose(b.seasonal.values, a.seasonal.values, atol=1e-6)
    assert np.allclose(b.irregular.values, a.irregular.values, atol=1e-6)


@pytest.mark.parametrize("method", ["STD", "STL"])
def test_deterministic(method, rng):
    y = rng.normal(size=24 * 5)
    a = decompose(make_series(y), method, 24)
    b = decompose(make_series(y), method, 24)
    assert np.array_equal(a.trend.values, b.trend.values)
    assert np.array_equal(a.seasonal.values, b.seasonal.values)


def test_component_set_checks_lengths():
    with pytest.raises(ValidationError):
        ComponentSet(make_series([1, 2]), make_series([1, 2]), make_series([1]), 2, Method.STD)


def test_rows_export():
    c = decompose_std(make_series(np.arange(36.0)), 6)
    rows = list(c.rows())
    assert len(rows) == 36 and rows[1][0] == 300.0
