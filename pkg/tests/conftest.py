import numpy as np
import pytest

from tempus.spectral import TemporalGrid, build_energy_grid


@pytest.fixture(scope="session")
def grid():
    return build_energy_grid(8.0, 64, 12)


@pytest.fixture(scope="session")
def window():
    return TemporalGrid.with_step(-160.0, 160.0, 0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
