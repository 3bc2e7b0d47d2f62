import numpy as np
import pytest

from agingcurves import AgeGrid, SimulationConfig, simulate_masked_panel


@pytest.fixture(scope="session")
def grid():
    return AgeGrid(18, 40)


@pytest.fixture(scope="session")
def masked_sim():
    """(masked, full, truth, diag) for a default-shaped panel of 300 players."""
    return simulate_masked_panel(SimulationConfig(n_players=300), np.random.default_rng(20))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance(request):
    """``acceptance(label, ok, detail)`` records one pass/fail line, prints
    it, and fails the test when ``ok`` is false."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def check(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip()
        lines.append(line)
        print(line)
        assert ok, line

    return check


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
