import numpy as np
import pytest

from tgvalm.ssn import PrimalDualState, SubproblemData
from tgvalm.prox import project_ball


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_state(rng, shape=(4, 4), alpha1=0.1, alpha0=0.05, sigma=8.0, scale=1.0):
    """A random subproblem with feasible (p, q) and a mix of active/inactive pixels."""
    m, n = shape
    f = rng.uniform(0, 1, shape)
    lam = project_ball(rng.normal(0, alpha1, (2, m, n)), alpha1)
    mu = project_ball(rng.normal(0, alpha0, (3, m, n)), alpha0)
    x = PrimalDualState(
        f + 0.05 * scale * rng.standard_normal(shape),
        0.02 * scale * rng.standard_normal((2, m, n)),
        project_ball(rng.normal(0, alpha1, (2, m, n)), alpha1),
        project_ball(rng.normal(0, alpha0, (3, m, n)), alpha0),
    )
    d = SubproblemData(f, lam, mu, sigma, alpha1, alpha0, 1.0)
    return x, d


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
