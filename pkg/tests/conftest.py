import numpy as np
import pytest

from rotators.model import RotatorParams, RotatorState

# lines recorded by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


def random_state(rng, vmax=0.3, omega_range=(0.3, 3.0), t=0.0, xscale=1.0):
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    nd = rng.normal(size=3)
    nd -= (n @ nd) * n
    nd *= rng.uniform(*omega_range) / np.linalg.norm(nd)
    return RotatorState(t, xscale * rng.normal(size=3), rng.uniform(-vmax, vmax, 3), n, nd)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def natural():
    return RotatorParams(a1=-1.0, a2=2.0)


@pytest.fixture
def defective():
    return RotatorParams(a1=-1.0, a2=1.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
