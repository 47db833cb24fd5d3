import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def box(shape, lo, hi, dtype=bool, value=True):
    """Array of ``shape`` with the half-open box [lo, hi) set to ``value``."""
    a = np.zeros(shape, dtype=dtype)
    a[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = value
    return a


# PASS/FAIL lines recorded by the acceptance tests, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
