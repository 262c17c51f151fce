import numpy as np
import pytest

from rankrpca import SyntheticSpec, make_problem

_ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance_log():
    """Collect one PASS/FAIL line per acceptance criterion for the summary."""
    return _ACCEPTANCE_LINES


def small_problem(seed=0, m=60, n=50, r=3, s_pct=10.0, sigma=0.01, missing=0.0):
    return make_problem(SyntheticSpec(m=m, n=n, r=r, s_pct=s_pct, sigma=sigma,
                                      missing_ratio=missing, seed=seed))


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
