import numpy as np
import pytest

from tailpwf.fixture import bundled_paths
from tailpwf.market_data import load_prices, to_return_panel

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fixture_series():
    prices, bench = bundled_paths()
    return load_prices(prices), load_prices(bench)


@pytest.fixture(scope="session")
def fixture_panels(fixture_series):
    assets, bench = fixture_series
    joint = to_return_panel(list(assets) + list(bench))
    return joint.select([t for t in joint.tickers if t != "DJIA"]), joint.select(["DJIA"])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
