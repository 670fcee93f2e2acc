import time

import numpy as np
import pytest

from acmcp import RunPlan, run
from acmcp.simgen import simulate_ar2

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ar2_series():
    return simulate_ar2(5000, seed=1)


@pytest.fixture(scope="session")
def ar2_timed(ar2_series):
    """Default six-method run on the AR(2) series and its wall time in seconds."""
    t0 = time.perf_counter()
    result = run(RunPlan(ar2_series))
    return result, time.perf_counter() - t0


@pytest.fixture(scope="session")
def ar2_run(ar2_timed):
    return ar2_timed[0]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":abc"))):
            terminalreporter.write_line(line)
