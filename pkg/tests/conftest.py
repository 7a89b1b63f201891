import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

BUBBLE = "x1*x2*(1-x1)*(1-x2)"
SINE = "sin(pi*x1)*sin(pi*x2)"


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


CRITERIA = []


def record(label, passed, detail):
    """Register one acceptance line for the terminal summary."""
    CRITERIA.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)
