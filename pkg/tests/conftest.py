import numpy as np
import pytest
from hypothesis import settings

from picrasp.model import ModelParams

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

BATTERY_ETA = (1.291, 1.339)
BATTERY_GAMMA = 1.644

# lines collected by the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def battery():
    return ModelParams(BATTERY_ETA, BATTERY_GAMMA, 0.0)


@pytest.fixture
def battery_dep():
    return ModelParams(BATTERY_ETA, BATTERY_GAMMA, 0.5)


def random_theta(rng, J=2, nu_range=(0.01, 2.0), dependent=True):
    eta = rng.uniform(0.5, 2.0, J)
    gamma = rng.uniform(0.7, 2.5)
    nu = rng.uniform(*nu_range) if dependent else 0.0
    return ModelParams(tuple(eta), gamma, nu)


def central_jacobian(f, x, rel_step=1e-6):
    """Central-difference Jacobian of a vector function, one column per input."""
    x = np.asarray(x, dtype=float)
    cols = []
    for u in range(x.size):
        h = rel_step * max(abs(x[u]), 1.0)
        up, dn = x.copy(), x.copy()
        up[u] += h
        dn[u] -= h
        cols.append((np.asarray(f(up)) - np.asarray(f(dn))) / (2 * h))
    return np.stack(cols, axis=-1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
