"""Shared fixtures: synthetic constants, small lattices, cheap quadrature."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from data.grid import GridSpec, SystemState
from data.profiles import initial_data_from_specs
from models.combustion import InitialData, ModelParams
from models.kernel import QuadraturePolicy

# identical layers, no convection to speak of: both temperatures solve u_t = u_xx
HEAT_PARAMS = dict(lambda_1=1.0, lambda_2=1.0, a_1=1.0, a_2=1.0, b_1=0.5, b_2=0.5, c_1=1e-9, c_2=1e-9)

TINY_DEFAULT_TOML = """
name = "tiny"
horizon = 0.05

[grid]
nx = 24
T = 0.05
nt = 4

[quadrature]
n_space = 16
n_time = 8
space_panels = 2
time_panels = 1
lattice_levels = 6

[fd]
refine = 2

[checks]
names = ["sector", "fuel", "quadrant", "lp_envelope", "continuity"]
"""

TINY_ZERO_TOML = """
name = "tiny-zero"
horizon = 0.1

[quadrature]
n_space = 16
n_time = 8
space_panels = 2
time_panels = 1
lattice_levels = 6

[data.u1]
family = "zero"

[data.u2]
family = "zero"

[grid]
nx = 16
T = 0.05
nt = 4

[checks]
names = ["sector", "fuel", "quadrant", "lp_envelope", "gradient", "continuity"]
"""


@pytest.fixture
def params():
    return ModelParams.synthetic()


@pytest.fixture
def heat_params():
    return ModelParams.synthetic(**HEAT_PARAMS)


@pytest.fixture
def small_grid():
    return GridSpec(half_width=8.0, nx=24, T=0.05, nt=4)


@pytest.fixture
def cheap_quad():
    return QuadraturePolicy(n_space=16, n_time=8, space_panels=2, time_panels=1,
                            lattice_levels=6, lattice_nodes=41)


@pytest.fixture
def default_data(small_grid):
    return initial_data_from_specs(small_grid.x())


@pytest.fixture
def zero_data(small_grid):
    x = small_grid.x()
    return InitialData.from_profiles(x, np.zeros_like(x), np.zeros_like(x), np.ones_like(x), np.ones_like(x))


@pytest.fixture
def constant_data(small_grid):
    x = small_grid.x()
    half = np.full_like(x, 0.5)
    return InitialData.from_profiles(x, half, half, np.zeros_like(x), np.zeros_like(x))


def make_state(x, t, u1, u2=None, y1=None, y2=None) -> SystemState:
    """SystemState from (nt, nx) temperature arrays; fuel defaults to 1, I to 0."""
    shape = (len(t), len(x))
    u1 = np.broadcast_to(np.asarray(u1, dtype=float), shape)
    u2 = u1 if u2 is None else np.broadcast_to(np.asarray(u2, dtype=float), shape)
    ones = np.ones(shape)
    return SystemState(
        x=x, t=t, u1=u1, u2=u2, I1=np.zeros(shape), I2=np.zeros(shape),
        y1=ones if y1 is None else np.broadcast_to(y1, shape),
        y2=ones if y2 is None else np.broadcast_to(y2, shape),
    )


def write_scenario(directory, text: str, filename: str = "scenario.toml") -> str:
    path = os.path.join(str(directory), filename)
    with open(path, "w") as fh:
        fh.write(text)
    return path
