import numpy as np
import pytest

from cdhoc.series import SampledSeries, Unit


def make_series(values, interval=300, start=0.0, unit=Unit.DIMENSIONLESS):
    return SampledSeries(float(start), interval, np.asarray(values, dtype=np.float64), unit)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def office_data():
    from cdhoc.gas_sim import preset

    p = preset("office")
    co2, occ = p.simulate(0)
    return p, co2, occ


def pytest_terminal_summary(terminalreporter):
    import sys

    suite = sys.modules.get("test_acceptance")
    if suite is None or not suite.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(suite.RESULTS):
        terminalreporter.write_line(suite.RESULTS[number])
