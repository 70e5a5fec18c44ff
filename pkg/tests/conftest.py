import numpy as np
import pytest

from fractalmesh.dynamics import Walk1D, disturbance_grid
from fractalmesh.slip import SlipHopper, period_one_policy


@pytest.fixture(scope="session")
def walk():
    return Walk1D(5)


@pytest.fixture(scope="session")
def walk_pushes():
    return disturbance_grid(2, -1.0, 1.0)


@pytest.fixture(scope="session")
def slip():
    return SlipHopper()


@pytest.fixture(scope="session")
def slip_policy(slip):
    return period_one_policy(slip, obs_std=(0.05, 0.2, 0.1))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
