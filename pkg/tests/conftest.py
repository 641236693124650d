import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import pottsgibbs as pg

# one line per acceptance criterion, echoed after the run (see
# tests/test_acceptance.py)
acceptance_lines = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def toy_2x2():
    """Small fixed instance on the 2x2 lattice (n=6, intercept only)."""
    rng = np.random.default_rng(20240917)
    n, p = 6, 4
    lattice = pg.build_lattice(2, 2)
    X = rng.standard_normal((n, p))
    W = np.ones((n, 1))
    y = 0.3 + X @ np.array([1.0, 1.0, -0.5, -0.5]) + rng.standard_normal(n) * 0.7
    return pg.Dataset(y, W, X, lattice)


@pytest.fixture(scope="session")
def default_hyper():
    return pg.Hyperparameters()


@pytest.fixture(scope="session")
def hyper_tuple(default_hyper):
    """(m_mu, c_mu, a_sigma, b_sigma) for the oracle implementations."""
    return (0.0, 100.0, default_hyper.a_sigma, default_hyper.b_sigma)
