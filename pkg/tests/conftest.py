import numpy as np
import pytest

from nls4 import radial, spectral
from nls4.potentials import example_potential, zero_potential


@pytest.fixture(scope="session")
def grid():
    return radial.make_grid(5, 20.0, 256)


@pytest.fixture(scope="session")
def small_grid():
    return radial.make_grid(5, 16.0, 96)


@pytest.fixture(scope="session")
def op_free(grid):
    return spectral.build_operator("free", grid)


@pytest.fixture(scope="session")
def op_full(grid):
    return spectral.build_operator("full", grid, example_potential(5))


@pytest.fixture(scope="session")
def op_zero(grid):
    return spectral.build_operator("full", grid, zero_potential(5))


@pytest.fixture(scope="session")
def small_op_free(small_grid):
    return spectral.build_operator("free", small_grid)


@pytest.fixture(scope="session")
def small_op_full(small_grid):
    return spectral.build_operator("full", small_grid, example_potential(5))


def random_smooth_field(grid, rng, width=3.0):
    """Smooth complex field with a decaying envelope; boundary-clean."""
    envelope = np.exp(-((grid.nodes / width) ** 2))
    values = (rng.standard_normal(grid.num_points)
              + 1j * rng.standard_normal(grid.num_points)) * envelope
    return radial.RadialField(grid, values)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
