import numpy as np
import pytest

from heisenberg_psido.heisenberg import HPoint, gaussian_sample, group_grid, random_gaussians
from heisenberg_psido.phase_space import make_grid
from heisenberg_psido.quantize import default_config
from heisenberg_psido.representations import lambda_grid


@pytest.fixture(scope="session")
def u_grid():
    return make_grid(1, 10.0, 256)


@pytest.fixture(scope="session")
def group_box():
    return group_grid(1, 8.0, 96, 6.0, 64)


@pytest.fixture(scope="session")
def gaussian(group_box):
    return gaussian_sample(group_box, HPoint(x=(0.3,), y=(-0.2,), t=0.1), width=1.0, t_width=1.0)


@pytest.fixture(scope="session")
def gaussians(group_box):
    return random_gaussians(group_box, 3, seed=7)


@pytest.fixture(scope="session")
def small_lgrid():
    return lambda_grid(1, 1 / 16, 16.0, 24)


@pytest.fixture(scope="session")
def quant_config(small_lgrid, u_grid):
    return default_config(n=1, lgrid=small_lgrid, dim=32, u_grid=u_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
