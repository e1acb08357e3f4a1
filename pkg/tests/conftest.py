import numpy as np
import pytest

from fluxport.grid import MapField, build_uniform_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def small_grid():
    return build_uniform_grid(8, 16)


def make_field(grid, nr, rng, scale=1.0):
    """Random ensemble field in the solver's state space:
    wrap-consistent with uniform pole rows."""
    values = scale * rng.standard_normal((nr, grid.ntm, grid.npm))
    values[:, 0, :] = values[:, 0, :1]
    values[:, -1, :] = values[:, -1, :1]
    f = MapField(values)
    f.refresh_wrap()
    return f
