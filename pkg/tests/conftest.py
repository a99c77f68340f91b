import numpy as np
import pytest

from tdsiclab.grid import Grid1D
from tdsiclab.model import ModelParams, System1D
from tdsiclab.static import StaticConfig, solve_static

TWO_E = ModelParams(a=0.8, b=0.5, R=1.5, z=0.4, n_electrons=2)
THREE_E = ModelParams(a=0.5, b=0.5, R=0.0, z=0.5, n_electrons=3)


@pytest.fixture(scope="session")
def grid_small():
    return Grid1D(128, 0.25)


@pytest.fixture(scope="session")
def sys2_small(grid_small):
    return System1D(grid_small, TWO_E)


@pytest.fixture(scope="session")
def sys3_small(grid_small):
    return System1D(grid_small, THREE_E)


@pytest.fixture(scope="session")
def static2_small(sys2_small):
    """Ground states of the 2e double well on a 128-point grid, tightly converged."""
    cfg = StaticConfig(tol_residual=1e-9, tol_sym=1e-9)
    return {s: solve_static(s, sys2_small, cfg) for s in ("LDA", "SIC", "HF")}


@pytest.fixture(scope="session")
def static3_small(sys3_small):
    cfg = StaticConfig(tol_residual=1e-9, tol_sym=1e-9)
    return {s: solve_static(s, sys3_small, cfg) for s in ("LDA", "SIC", "HF")}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_set(rng, n_orb, g, complex_=True):
    s = rng.normal(size=(n_orb, g.n_points))
    if complex_:
        s = s + 1j * rng.normal(size=(n_orb, g.n_points))
    return s * np.exp(-(g.x / 4) ** 2)
