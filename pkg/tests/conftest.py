import numpy as np
import pytest

from collapsar.spectral import Grid


@pytest.fixture(scope="session")
def small_grid():
    return Grid(32, 16.0)


@pytest.fixture(scope="session")
def grid64():
    return Grid(64, 32.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA = []


@pytest.fixture(scope="session")
def criterion_log():
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    return _CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_CRITERIA):
        terminalreporter.write_line(line)
