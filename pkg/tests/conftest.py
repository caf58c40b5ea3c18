"""Shared fixtures: small grids and the expensive session-scoped objects.

The branch and the refined physical state take seconds to build, so they
are computed once per session and shared by the continuation, physical
and acceptance tests.
"""

import numpy as np
import pytest

from rotostate.continuation import continue_branch
from rotostate.euler import reconstruct
from rotostate.functional import FunctionalParams
from rotostate.grids import Grid


SMALL = dict(n_alpha=96, n_s=32, m=3, n_harmonics=8)
TINY = dict(n_alpha=48, n_s=16, m=3, n_harmonics=4)


@pytest.fixture(scope="session")
def small_grid():
    return Grid(**SMALL)


@pytest.fixture(scope="session")
def tiny_grid():
    return Grid(**TINY)


@pytest.fixture(scope="session")
def small_params(small_grid):
    return FunctionalParams(m=3, dlambda_da=1.0, a=0.05, grid=small_grid)


@pytest.fixture(scope="session")
def tiny_params(tiny_grid):
    return FunctionalParams(m=3, dlambda_da=1.0, a=0.05, grid=tiny_grid)


@pytest.fixture(scope="session")
def branch(small_params):
    """m = 3 branch to xi = 0.02 in four steps on the 96 x 32 grid."""
    bf = continue_branch(small_params, xi_step=0.005, n_steps=4)
    assert len(bf.points) == 5
    return bf


@pytest.fixture(scope="session")
def refined_state(branch, small_params):
    """Physical state at the branch endpoint, layer width a = 0.05."""
    return reconstruct(branch.points[-1], small_params, refine=True)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
