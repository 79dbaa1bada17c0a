import numpy as np
import pytest

from revprice.market import MarketConfig, uniform_demand_model

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def default_market():
    return MarketConfig(total_resource=1000.0, num_users=100, num_slots=10)


@pytest.fixture(scope="session")
def default_model():
    return uniform_demand_model(1.0, 2.0, 100, 10, per_slot_hi_rule=lambda h: 2.0 * h)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
