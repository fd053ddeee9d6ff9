import numpy as np
import pytest

from micropolar.grid import WaveGrid
from micropolar.initial_data import ProfileParams, build_a0, default_box, resolving_dims

SEED = 20240501


@pytest.fixture(scope="session")
def cube16():
    return WaveGrid((16, 16, 16))


@pytest.fixture(scope="session")
def cube32():
    return WaveGrid((32, 32, 32))


@pytest.fixture(scope="session")
def aniso():
    return WaveGrid((24, 16, 20), (3.0, 5.0, 11.0))


@pytest.fixture(scope="session")
def datum_grid():
    """Smallest dealiased grid resolving the eps = 1/4 datum."""
    return WaveGrid(resolving_dims(0.25, dealias=True), default_box(0.25))


@pytest.fixture(scope="session")
def large_a0(datum_grid):
    return build_a0(ProfileParams(0.25), datum_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
