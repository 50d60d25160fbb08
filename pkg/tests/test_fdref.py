"""Finite-difference oracle: scheme properties and agreement with Picard."""

import ast
import os

import numpy as np
import pytest

import config as cfg
from data.grid import GridSpec
from data.profiles import initial_data_from_specs
from models.combustion import InitialData, phi_upper, upper_solution
from models.errors import ConfigurationError, FdStabilityError
from models.fdref import FdConfig, fd_solve, fd_step
from models.solver import picard_solve


def _level(u1, u2, y1, y2):
    return {"u1": u1, "u2": u2, "I1": np.zeros_like(u1), "I2": np.zeros_like(u1), "y1": y1, "y2": y2}


def _gaussian_data(grid, y_level=0.0):
    x = grid.x()
    bump = np.exp(-x**2)
    fuel = np.full_like(x, y_level)
    return InitialData.from_profiles(x, bump, bump, fuel, fuel)


@pytest.mark.parametrize("kwargs", [
    {"nx": 8, "nt": 10},
    {"nx": 32, "nt": 1},
    {"nx": 32, "nt": 10, "theta": 1.5},
    {"nx": 32, "nt": 10, "boundary": "periodic"},
])
def test_fd_config_invariants(kwargs):
    with pytest.raises(ConfigurationError):
        FdConfig(**kwargs)


def test_for_grid_nests_the_solver_lattice(small_grid):
    fd = FdConfig.for_grid(small_grid, refine=3)
    assert fd.nx == (small_grid.nx - 1) * 3 + 1
    assert fd.nt == (small_grid.nt - 1) * 3 + 1


def test_explicit_diffusion_stability_bound():
    fd = FdConfig(nx=32, nt=10, theta=0.0)
    fd.check_stability(dx=0.1, dt=0.004, a_max=1.0, b_max=0.0)
    with pytest.raises(FdStabilityError):
        fd.check_stability(dx=0.1, dt=0.006, a_max=1.0, b_max=0.0)
    FdConfig(nx=32, nt=10, theta=0.5).check_stability(dx=0.1, dt=0.006, a_max=1.0, b_max=0.0)


def test_upwind_cfl_bound():
    with pytest.raises(FdStabilityError):
        FdConfig(nx=32, nt=10, theta=1.0).check_stability(dx=0.1, dt=0.3, a_max=1.0, b_max=0.5)


def test_fd_solve_raises_on_unstable_explicit_step(params, small_grid, default_data):
    with pytest.raises(FdStabilityError):
        fd_solve(default_data, params, small_grid,
                 FdConfig(nx=(small_grid.nx - 1) * 8 + 1, nt=small_grid.nt, theta=0.0))


@pytest.mark.parametrize("boundary", cfg.FD_BOUNDARIES)
def test_equal_constant_temperatures_without_fuel_are_stationary(params, boundary):
    x = np.linspace(-4.0, 4.0, 33)
    u = np.full_like(x, 0.5)
    y = np.zeros_like(x)
    fd = FdConfig(nx=33, nt=4, boundary=boundary)
    out = fd_step(_level(u, u.copy(), y, y.copy()), params, x, 0.01, fd)
    np.testing.assert_allclose(out["u1"], 0.5, rtol=1e-13)
    np.testing.assert_allclose(out["u2"], 0.5, rtol=1e-13)
    assert np.all(out["y1"] == 0.0)


def test_fuel_decreases_and_I_accumulates(params):
    x = np.linspace(-4.0, 4.0, 33)
    u = np.exp(-x**2)
    y = np.ones_like(x)
    out = fd_step(_level(u, u.copy(), y, y.copy()), params, x, 0.01, FdConfig(nx=33, nt=4))
    assert np.all(out["I1"] >= 0.0)
    assert np.all(out["y1"] <= 1.0)
    assert out["y1"][16] < 1.0


def test_mass_conserved_with_zero_flux_edges(heat_params):
    grid = GridSpec(half_width=8.0, nx=48, T=0.2, nt=5)
    state = fd_solve(_gaussian_data(grid), heat_params, grid, full=True)
    mass = state.u1.sum(axis=1)
    np.testing.assert_allclose(mass, mass[0], rtol=1e-8)


def test_maximum_principle_with_implicit_diffusion(heat_params):
    grid = GridSpec(half_width=8.0, nx=48, T=0.2, nt=5)
    fd = FdConfig.for_grid(grid, theta=1.0)
    state = fd_solve(_gaussian_data(grid), heat_params, grid, fd, full=True)
    peaks = state.u1.max(axis=1)
    assert np.all(np.diff(peaks) <= 1e-14)
    assert state.u1.min() >= -1e-14


def test_gaussian_diffusion_matches_closed_form(heat_params):
    grid = GridSpec(half_width=8.0, nx=48, T=0.1, nt=4)
    state = fd_solve(_gaussian_data(grid), heat_params, grid)
    x, t = state.x, state.t
    assert state.u1.shape == (grid.nt, grid.nx)
    np.testing.assert_allclose(t, grid.times(), atol=1e-15)
    np.testing.assert_allclose(x, grid.x(), atol=1e-12)
    exact = np.exp(-x[None, :] ** 2 / (1 + 4 * t[:, None])) / np.sqrt(1 + 4 * t[:, None])
    np.testing.assert_allclose(state.u1, exact, rtol=0, atol=5e-3)
    np.testing.assert_allclose(state.u2, state.u1, rtol=0, atol=1e-12)


def test_fd_solve_requires_a_nested_lattice(params, small_grid, default_data):
    with pytest.raises(ConfigurationError):
        fd_solve(default_data, params, small_grid, FdConfig(nx=small_grid.nx + 1, nt=small_grid.nt))


def test_fd_preserves_the_sector(params, small_grid, default_data):
    fd = FdConfig.for_grid(small_grid, theta=1.0)
    state = fd_solve(default_data, params, small_grid, fd)
    env = upper_solution(default_data, params)
    phi = phi_upper(state.t, env)[:, None]
    assert state.u1.min() >= -1e-12 and state.u2.min() >= -1e-12
    assert np.all(state.u1 <= phi + 1e-8) and np.all(state.u2 <= phi + 1e-8)
    assert np.all(np.diff(state.y1, axis=0) <= 0.0)


def test_oracle_is_independent_of_the_kernel():
    import models.fdref as fdref

    with open(fdref.__file__) as fh:
        tree = ast.parse(fh.read())
    imported = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.ImportFrom) and node.module:
            imported.add(node.module)
        elif isinstance(node, ast.Import):
            imported.update(alias.name for alias in node.names)
    assert "models.kernel" not in imported
    assert "models.solver" not in imported
    assert not any(name.startswith("models.verify") for name in imported)


@pytest.mark.slow
def test_oracle_agrees_with_picard_on_one_window(params):
    grid = GridSpec(half_width=8.0, nx=48, T=0.05, nt=4)
    data = initial_data_from_specs(grid.x())
    state, report = picard_solve(data, params, grid)
    oracle = fd_solve(data, params, grid.with_window(report.window_T))
    for i in (1, 2):
        ref = oracle.u(i)[-1]
        gap = np.max(np.abs(state.u(i)[-1] - ref)) / np.max(np.abs(ref))
        assert gap <= 5e-2


def test_refinement_gap_shrinks(params, small_grid, default_data):
    finals = {
        refine: fd_solve(default_data, params, small_grid, FdConfig.for_grid(small_grid, refine=refine)).final()
        for refine in (2, 4, 8)
    }
    for name in ("u1", "u2"):
        coarse = np.max(np.abs(finals[4][name] - finals[2][name]))
        fine = np.max(np.abs(finals[8][name] - finals[4][name]))
        assert 0.0 < fine < coarse
