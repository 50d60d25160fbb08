"""
models/fdref.py — Finite-Difference Oracle
==========================================
Independent θ-scheme for the two-layer system, used only to cross-check
the parametrix/Picard pipeline:

  diffusion  α_i(y_i)·u_xx   θ-weighted central differences (tridiagonal solve)
  convection β_i(y_i)·u_x    explicit first-order upwind (β_i > 0)
  reaction   f_i             explicit
  fuel       y_i             exact exponential update from the trapezoid increment of I_i

The oracle depends on the model functions and the lattice containers only;
it never touches the kernel or the Picard solver.
"""

from __future__ import annotations

import logging
import os
import sys
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg
from data.grid import GridSpec, SystemState
from models.combustion import (
    InitialData,
    ModelParams,
    alpha_coeff,
    arrhenius_tilde,
    beta_coeff,
    fuel_from_history,
    reaction_f,
)
from models.errors import ConfigurationError, FdStabilityError, NumericalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FdConfig:
    """
    nx, nt   : oracle lattice size over [−L, L] × [0, T]
    theta    : diffusion implicitness in [0, 1] (0.5 = Crank–Nicolson)
    boundary : "constant-extension" (zero-flux ghost nodes) or "dirichlet" (edges held)
    """

    nx: int
    nt: int
    theta: float = cfg.FD_THETA
    boundary: str = cfg.FD_BOUNDARY

    def __post_init__(self):
        if self.nx < 16 or self.nt < 2:
            raise ConfigurationError(f"FdConfig needs nx >= 16 and nt >= 2, got {self.nx}, {self.nt}")
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigurationError(f"theta must lie in [0, 1], got {self.theta}")
        if self.boundary not in cfg.FD_BOUNDARIES:
            raise ConfigurationError(f"unknown boundary {self.boundary!r}; expected one of {cfg.FD_BOUNDARIES}")

    @classmethod
    def for_grid(cls, grid: GridSpec, refine: int = cfg.FD_REFINE, **kwargs) -> "FdConfig":
        """Oracle lattice nesting the solver lattice, refine× finer in x and t."""
        return cls(nx=(grid.nx - 1) * refine + 1, nt=(grid.nt - 1) * refine + 1, **kwargs)

    def check_stability(self, dx: float, dt: float, a_max: float, b_max: float) -> None:
        """
        Raises FdStabilityError when θ = 0 and dt > dx²/(2·a_max), or when the
        upwind CFL number b_max·dt/dx exceeds 1.
        """
        if self.theta == 0.0 and dt > dx * dx / (2.0 * a_max):
            raise FdStabilityError(
                f"explicit diffusion unstable: dt={dt:.4g} > dx^2/(2 a_max)={dx * dx / (2.0 * a_max):.4g}"
            )
        if b_max * dt / dx > 1.0:
            raise FdStabilityError(f"upwind CFL number {b_max * dt / dx:.4g} exceeds 1")


def _second_difference(u: np.ndarray, dx: float) -> np.ndarray:
    padded = np.concatenate([u[:1], u, u[-1:]])
    return (padded[2:] - 2.0 * u + padded[:-2]) / (dx * dx)


def _upwind_difference(u: np.ndarray, dx: float) -> np.ndarray:
    return (u - np.concatenate([u[:1], u[:-1]])) / dx


def _diffusion_matrix(alpha: np.ndarray, r_scale: float, boundary: str) -> np.ndarray:
    """Banded (1, 1) form of I − θ·dt·α·∂ₓₓ."""
    r = r_scale * alpha
    n = r.size
    ab = np.zeros((3, n))
    ab[0, 1:] = -r[:-1]
    ab[1, :] = 1.0 + 2.0 * r
    ab[2, :-1] = -r[1:]
    if boundary == "dirichlet":
        ab[1, 0] = ab[1, -1] = 1.0
        ab[0, 1] = 0.0
        ab[2, -2] = 0.0
    else:
        # ghost node equals the edge node
        ab[1, 0] = 1.0 + r[0]
        ab[1, -1] = 1.0 + r[-1]
    return ab


def fd_step(level: dict, params: ModelParams, x: np.ndarray, dt: float, fd: FdConfig) -> dict:
    """
    Advance one time level.

    Parameters
    ----------
    level  : dict with u1, u2, I1, I2, y1, y2 — (nx,) arrays at time t_n
    params : ModelParams
    x      : (nx,) uniform oracle nodes
    dt     : float — time step
    fd     : FdConfig

    Returns
    -------
    dict with the same keys at t_{n+1}
    """
    dx = float(x[1] - x[0])
    u = (level["u1"], level["u2"])
    out = {}
    for i in (1, 2):
        y = level[f"y{i}"]
        ui = u[i - 1]
        alpha = alpha_coeff(i, y, params)
        beta = beta_coeff(i, y, params)
        explicit = (
            (1.0 - fd.theta) * alpha * _second_difference(ui, dx)
            - beta * _upwind_difference(ui, dx)
            + reaction_f(i, y, u[0], u[1], params)
        )
        rhs = ui + dt * explicit
        if fd.boundary == "dirichlet":
            rhs[0], rhs[-1] = ui[0], ui[-1]
        ab = _diffusion_matrix(np.broadcast_to(alpha, ui.shape), fd.theta * dt / (dx * dx), fd.boundary)
        new = solve_banded((1, 1), ab, rhs)
        if not np.all(np.isfinite(new)):
            raise NumericalError(f"finite-difference step produced non-finite u{i}")
        dI = 0.5 * dt * (arrhenius_tilde(ui, params.E) + arrhenius_tilde(new, params.E))
        out[f"u{i}"] = new
        out[f"I{i}"] = level[f"I{i}"] + dI
        out[f"y{i}"] = fuel_from_history(y, dI, params.layer(i)["A"])
    return out


def _resample(x_from: np.ndarray, values: np.ndarray, x_to: np.ndarray) -> np.ndarray:
    if np.ptp(values) == 0.0:
        return np.full(x_to.shape, float(values[0]))
    return np.maximum(CubicSpline(x_from, values)(x_to), 0.0)


def fd_solve(
    data: InitialData,
    params: ModelParams,
    grid: GridSpec,
    fd: FdConfig | None = None,
    full: bool = False,
) -> SystemState:
    """
    March the oracle over [0, grid.T].

    Parameters
    ----------
    data : InitialData on grid.x()
    grid : GridSpec — the solver lattice the result is reported on
    fd   : FdConfig — nested lattice; defaults to FdConfig.for_grid(grid)
    full : bool — return the oracle lattice instead of the solver lattice

    Returns
    -------
    SystemState
    """
    fd = FdConfig.for_grid(grid) if fd is None else fd
    if (fd.nx - 1) % (grid.nx - 1) or (fd.nt - 1) % (grid.nt - 1):
        raise ConfigurationError("FdConfig lattice must nest the solver lattice")
    kx = (fd.nx - 1) // (grid.nx - 1)
    kt = (fd.nt - 1) // (grid.nt - 1)
    x = np.linspace(-grid.half_width, grid.half_width, fd.nx)
    t = np.linspace(0.0, grid.T, fd.nt)
    dx, dt = float(x[1] - x[0]), float(t[1] - t[0])
    a_max = max(params.layer(i)["lam"] / params.layer(i)["a"] for i in (1, 2))
    b_max = max(params.layer(i)["c"] / params.layer(i)["a"] for i in (1, 2))
    fd.check_stability(dx, dt, a_max, b_max)

    level = {}
    for i in (1, 2):
        level[f"u{i}"] = _resample(data.x, data.u0(i), x)
        level[f"y{i}"] = _resample(data.x, data.y0(i), x)
        level[f"I{i}"] = np.zeros_like(x)
    history = {k: [v] for k, v in level.items()}
    for n in range(1, fd.nt):
        level = fd_step(level, params, x, dt, fd)
        for k, v in level.items():
            history[k].append(v)
    logger.debug("fd oracle: %d steps of dt=%.4g on %d nodes", fd.nt - 1, dt, fd.nx)

    fields = {k: np.array(v) for k, v in history.items()}
    if full:
        return SystemState(x=x, t=t, **fields)
    return SystemState(
        x=x[::kx], t=t[::kt],
        **{k: v[::kt, ::kx] for k, v in fields.items()},
    )


if __name__ == "__main__":
    from data.profiles import initial_data_from_specs

    params = ModelParams.synthetic()
    grid = GridSpec()
    data = initial_data_from_specs(grid.x())
    state = fd_solve(data, params, grid)
    final = state.final()
    print(f"  fd oracle at T={grid.T}: max u1 {final['u1'].max():.6f}, max u2 {final['u2'].max():.6f}")
    print(f"  min fuel {min(final['y1'].min(), final['y2'].min()):.6f}")
    print("\n[fdref.py] OK")
