import datetime as dt

import numpy as np
import pytest

from delaycast.data import EventSeries, synth_daily
from delaycast.hawkes import HawkesParams
from delaycast.simulate import simulate

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def true_params():
    return HawkesParams(0.5, 1.0, 2.0)


@pytest.fixture(scope="session")
def simulated_events(true_params):
    return simulate(true_params, None, 0.0, 2000.0, seed=7)


@pytest.fixture(scope="session")
def weekly_series():
    return synth_daily(120, weekly_amplitude=50, noise_sd=5, seed=3)


@pytest.fixture
def write_csv(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p
    return _write


@pytest.fixture
def origin():
    return dt.datetime(2019, 1, 1)


@pytest.fixture
def tiny_events():
    return EventSeries.from_times([1.0, 2.0, 4.5], horizon=6.0)
