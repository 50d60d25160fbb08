"""
models/solver.py — Picard Iteration Through the Integral Representation
=======================================================================
Local solve of the two-layer system by the scheme

  u^{n+1}_i = 𝒜_i(u^n) = ∫Γ_{[v_i(u^n_i)]}(x,t,ξ,0) u_{i,0}(ξ) dξ
                        + ∫_0^t ∫Γ_{[v_i(u^n_i)]}(x,t,ξ,τ) f_i(y_i, u^n_1, u^n_2)(ξ,τ) dξ dτ

where v_i(u) = (α_i(y_i), β_i(y_i), 0) and y_i follows from the running
reaction integral I_i = ∫₀ᵗ f̃(u_i). Each layer gets a fresh KernelHandle per
iterate and the whole lattice is propagated in one assembly
(models/kernel.propagate).

Windows that fail to contract, or whose iterates leave the Σ ball, are
shrunk by window_shrink_factor and restarted. continue_global chains
windows, carrying I_i forward so the fuel stays globally consistent.
"""

from __future__ import annotations

import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, trapezoid

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg
from data.grid import GridSpec, SystemState
from models.coefficients import ParabolicCoefficients, holder_norm
from models.combustion import (
    InitialData,
    ModelParams,
    UpperSolution,
    alpha_coeff,
    arrhenius_tilde,
    beta_coeff,
    fuel_from_history,
    lp_invariant_window,
    phi_upper,
    reaction_f,
    reaction_lipschitz,
)
from models.errors import BallViolationError, ConfigurationError, LocalExistenceError
from models.kernel import KernelHandle, QuadraturePolicy, propagate, propagation_constant

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Configuration and reports
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PicardConfig:
    """
    ball_radius          : (M_1, M_2) Σ radii, or None to derive them from the data
    tol_fixed_point      : sup-node gap stopping threshold
    max_iters            : iterations per window attempt
    window_shrink_factor : T multiplier applied on non-contraction or ball exit
    seed                 : seed of the random Hölder pairs
    """

    ball_radius: tuple | None = None
    tol_fixed_point: float = cfg.PICARD_TOL
    max_iters: int = cfg.PICARD_MAX_ITERS
    window_shrink_factor: float = cfg.PICARD_SHRINK
    seed: int = cfg.RANDOM_SEED

    def __post_init__(self):
        if not self.tol_fixed_point > 0:
            raise ConfigurationError("tol_fixed_point must be positive")
        if not 0 < self.window_shrink_factor < 1:
            raise ConfigurationError("window_shrink_factor must lie in (0, 1)")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if self.ball_radius is not None:
            if len(self.ball_radius) != 2 or min(self.ball_radius) <= 0:
                raise ConfigurationError("ball_radius must be a pair of positive radii")
            object.__setattr__(self, "ball_radius", tuple(float(r) for r in self.ball_radius))


@dataclass(frozen=True)
class IterationRecord:
    window_T: float
    iteration: int
    gap: float
    holder_u1: float
    holder_u2: float
    min_u: float
    max_u: float


@dataclass
class PicardReport:
    """Per-iteration history of one local solve, including abandoned attempts."""

    records: list = field(default_factory=list)
    shrink_history: list = field(default_factory=list)
    ball_radius: tuple = (np.inf, np.inf)
    window_T: float = 0.0
    iterations: int = 0
    converged: bool = False

    def to_frame(self) -> pd.DataFrame:
        cols = ["window_T", "iteration", "gap", "holder_u1", "holder_u2", "min_u", "max_u"]
        return pd.DataFrame([r.__dict__ for r in self.records], columns=cols)

    @property
    def gaps(self) -> list:
        return [r.gap for r in self.records if r.window_T == self.window_T]


@dataclass(frozen=True, eq=False)
class LinearizedSystem:
    """Per-layer coefficients frozen at one iterate, with the fuel bookkeeping behind them."""

    coeffs: tuple
    I: tuple
    y: tuple
    holder_R: tuple


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------
def _check_grid(data: InitialData, grid: GridSpec) -> np.ndarray:
    x = grid.x()
    if data.x.shape != x.shape or not np.allclose(data.x, x):
        raise ConfigurationError("initial data are not sampled on the grid's spatial nodes")
    return x


def reaction_integral(u: np.ndarray, t: np.ndarray, E: float, offset=None) -> np.ndarray:
    """Running ∫ f̃(u) dτ along the time axis, trapezoid rule, starting from offset."""
    I = cumulative_trapezoid(arrhenius_tilde(u, E), t, axis=0, initial=0.0)
    if offset is not None:
        I = I + np.asarray(offset, dtype=float)[None, :]
    return I


def assemble_coefficients(
    u_prev: tuple,
    data: InitialData,
    params: ModelParams,
    grid: GridSpec,
    i_offset: tuple | None = None,
    iteration: int = 0,
) -> LinearizedSystem:
    """
    Coefficients v_i = (α_i(y_i), β_i(y_i), 0) on the window lattice.

    Parameters
    ----------
    u_prev    : (u1, u2) — previous iterate, each (nt, nx)
    data      : InitialData — y0 is the fuel at global t = 0
    params    : ModelParams
    grid      : GridSpec — window lattice (local time from 0)
    i_offset  : (I1, I2) at the window start, or None for zeros
    iteration : int — only used for logging

    Returns
    -------
    LinearizedSystem with λ₀ = λ_i/(a_i+b_i‖y0_i‖∞), λ₁ = λ_i/a_i and
    R_i = (λ_i+c_i)/a_i·(1 + 2b_i‖y0_i‖₁/a_i) attached.
    """
    x = _check_grid(data, grid)
    t = grid.times()
    coeffs, Is, ys, radii = [], [], [], []
    for i in (1, 2):
        k = params.layer(i)
        offset = None if i_offset is None else i_offset[i - 1]
        I = reaction_integral(u_prev[i - 1], t, params.E, offset)
        y = fuel_from_history(data.y0(i)[None, :], I, k["A"])
        ysup = data.y0_sup(i)
        R = (k["lam"] + k["c"]) / k["a"] * (1.0 + 2.0 * k["b"] * data.lipschitz_norm(data.y0(i)) / k["a"])
        coeffs.append(ParabolicCoefficients.from_lattice(
            x, t,
            alpha_coeff(i, y, params),
            beta_coeff(i, y, params),
            lambda0=k["lam"] / (k["a"] + k["b"] * ysup),
            lambda1=k["lam"] / k["a"],
            horizon=float(t[-1]),
        ))
        Is.append(I)
        ys.append(y)
        radii.append(R)
    logger.debug("assembled coefficients for iterate %d on window T=%.4g", iteration, grid.T)
    return LinearizedSystem(tuple(coeffs), tuple(Is), tuple(ys), tuple(radii))


def holder_norm_estimate(
    field: np.ndarray,
    grid: GridSpec,
    t: np.ndarray | None = None,
    seed: int = cfg.RANDOM_SEED,
) -> float:
    """
    Discrete C^{1,1/2} norm: sup|u| + max |Δu|/(|Δx| + |Δt|^{1/2}).

    Pairs are all axis-adjacent node pairs plus HOLDER_RANDOM_PAIRS seeded
    random pairs. A field with fewer rows or columns than the grid uses the
    leading time levels / spatial nodes.
    """
    v = np.atleast_2d(np.asarray(field, dtype=float))
    x = grid.x()[: v.shape[1]]
    t = grid.times()[: v.shape[0]] if t is None else np.asarray(t, dtype=float)
    return holder_norm(v, x, t, alpha=1.0, seed=seed)


def apply_A(
    u_prev: tuple,
    data: InitialData,
    params: ModelParams,
    grid: GridSpec,
    quad: QuadraturePolicy | None = None,
    levi_depth: int = cfg.LEVI_DEPTH,
    i_offset: tuple | None = None,
    ball_radius: tuple | None = None,
    reaction_shift: float = 0.0,
    seed: int = cfg.RANDOM_SEED,
) -> tuple:
    """
    One application of the Picard map 𝒜.

    Parameters
    ----------
    u_prev         : (u1, u2) iterate on the window lattice
    data           : InitialData — u0 is the window's initial profile
    ball_radius    : (M_1, M_2); inputs outside the ball raise BallViolationError
    reaction_shift : constant δ added to both reaction terms (comparison solves)

    Returns
    -------
    ((w1, w2), LinearizedSystem)
    """
    quad = QuadraturePolicy.solver_grade() if quad is None else quad
    x = _check_grid(data, grid)
    t = grid.times()
    if ball_radius is not None:
        for i in (1, 2):
            norm = holder_norm_estimate(u_prev[i - 1], grid, seed=seed)
            if norm > ball_radius[i - 1]:
                raise BallViolationError(
                    f"iterate u{i} has C^(1,1/2) norm {norm:.6g} outside the ball M={ball_radius[i - 1]:.6g}"
                )
    system = assemble_coefficients(u_prev, data, params, grid, i_offset)
    out = []
    for i in (1, 2):
        u0 = data.u0(i)
        source = reaction_f(i, system.y[i - 1], u_prev[0], u_prev[1], params) + reaction_shift
        w = np.empty((t.size, x.size))
        w[0] = u0
        if np.any(u0) or np.any(source):
            handle = KernelHandle(system.coeffs[i - 1], levi_depth=levi_depth, quad=quad)
            w[1:] = propagate(handle, x, u0, 0.0, t[1:], source=source, source_times=t)
        else:
            w[1:] = 0.0
        out.append(w)
    return tuple(out), system


# ---------------------------------------------------------------------------
# Local solve
# ---------------------------------------------------------------------------
def default_ball_radius(
    data: InitialData,
    params: ModelParams,
    grid: GridSpec,
    i_offset: tuple | None = None,
) -> tuple:
    """
    Σ radii fixed from the data before the first iterate.

    M_i = BALL_SLACK · K_i · ‖u_i0‖_1, with K_i the propagation constant
    of the coefficients frozen at u⁰ = u0.
    """
    u = tuple(np.tile(data.u0(i), (grid.nt, 1)) for i in (1, 2))
    system = assemble_coefficients(u, data, params, grid, i_offset)
    radius = []
    for i in (1, 2):
        K = propagation_constant(system.coeffs[i - 1])
        radius.append(cfg.BALL_SLACK * K * data.lipschitz_norm(data.u0(i)) + 1e-12)
        logger.debug("ball radius M_%d = %.4g (K=%.4g)", i, radius[-1], K)
    return tuple(radius)


def picard_solve(
    data: InitialData,
    params: ModelParams,
    grid: GridSpec,
    picard: PicardConfig | None = None,
    quad: QuadraturePolicy | None = None,
    levi_depth: int = cfg.LEVI_DEPTH,
    i_offset: tuple | None = None,
    t0: float = 0.0,
    reaction_shift: float = 0.0,
) -> tuple:
    """
    Iterate u^n = 𝒜(u^{n−1}) from u⁰(x,t) = u0(x) until the sup-node gap
    drops below tol_fixed_point.

    A window attempt is abandoned, and T multiplied by window_shrink_factor,
    when an iterate leaves the Σ ball, when gaps grow after the third
    iterate, or when max_iters pass without convergence.

    Parameters
    ----------
    data     : InitialData on grid.x()
    grid     : GridSpec — requested window; the solved window may be shorter
    i_offset : reaction integrals at the window start (continuation)
    t0       : absolute start time stamped on the returned state

    Returns
    -------
    (SystemState, PicardReport)

    Raises
    ------
    LocalExistenceError when T falls below nt·machine-eps.
    """
    picard = PicardConfig() if picard is None else picard
    quad = QuadraturePolicy.solver_grade() if quad is None else quad
    _check_grid(data, grid)
    report = PicardReport()
    T = grid.T
    floor = grid.nt * np.finfo(float).eps

    while True:
        g = grid.with_window(T)
        u = tuple(np.tile(data.u0(i), (g.nt, 1)) for i in (1, 2))
        radius = picard.ball_radius
        if radius is None:
            radius = default_ball_radius(data, params, g, i_offset)
        prev_gap = np.inf
        reason = None
        for n in range(1, picard.max_iters + 1):
            try:
                w, _ = apply_A(u, data, params, g, quad, levi_depth, i_offset, radius, reaction_shift, picard.seed)
            except BallViolationError as exc:
                reason = f"ball: {exc}"
                break
            holders = [holder_norm_estimate(w[i], g, seed=picard.seed) for i in (0, 1)]
            gap = float(max(np.max(np.abs(w[i] - u[i])) for i in (0, 1)))
            report.records.append(IterationRecord(
                window_T=T, iteration=n, gap=gap,
                holder_u1=holders[0], holder_u2=holders[1],
                min_u=float(min(w[0].min(), w[1].min())),
                max_u=float(max(w[0].max(), w[1].max())),
            ))
            logger.info("picard T=%.4g iter %d: gap %.3e, holder (%.4g, %.4g)", T, n, gap, *holders)
            u = w
            if any(h > r for h, r in zip(holders, radius)):
                reason = f"ball: iterate {n} norms ({holders[0]:.4g}, {holders[1]:.4g}) exceed {radius}"
                break
            if gap < picard.tol_fixed_point:
                report.window_T, report.iterations, report.converged = T, n, True
                report.ball_radius = radius
                # I and y follow the converged iterate, not its predecessor
                final = assemble_coefficients(u, data, params, g, i_offset, n)
                state = SystemState(
                    x=g.x(), t=t0 + g.times(),
                    u1=u[0], u2=u[1], I1=final.I[0], I2=final.I[1],
                    y1=final.y[0], y2=final.y[1],
                )
                return state, report
            if n >= 3 and gap > prev_gap:
                reason = f"non-contraction: gap {gap:.3e} > {prev_gap:.3e} at iterate {n}"
                break
            prev_gap = gap
        if reason is None:
            reason = f"no convergence in {picard.max_iters} iterations"
        new_T = T * picard.window_shrink_factor
        report.shrink_history.append((T, reason))
        logger.warning("picard window T=%.4g abandoned (%s); retrying with T=%.4g", T, reason, new_T)
        if new_T < floor:
            raise LocalExistenceError(
                f"window shrunk below {floor:.3g} without a converged local solve",
                shrink_history=list(report.shrink_history),
            )
        T = new_T


# ---------------------------------------------------------------------------
# Global continuation
# ---------------------------------------------------------------------------
def _sup_dx(u: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.max(np.abs(np.gradient(u, x, axis=-1)), axis=-1)


def lp_norm(u: np.ndarray, x: np.ndarray, p: float) -> np.ndarray:
    """Trapezoid Lᵖ norm over x of each row."""
    return trapezoid(np.abs(u) ** p, x, axis=-1) ** (1.0 / p)


@dataclass
class GlobalReport:
    windows: list = field(default_factory=list)
    table: pd.DataFrame | None = None

    @property
    def shrink_history(self) -> list:
        return [entry for rep in self.windows for entry in rep.shrink_history]


def clip_restart(u: np.ndarray) -> tuple:
    """
    Clamp a restart profile to u ≥ 0.

    Returns (clipped profile, number of negative nodes, min(u, 0)).
    """
    u = np.asarray(u, dtype=float)
    negative = u < 0
    return np.maximum(u, 0.0), int(negative.sum()), float(min(u.min(), 0.0))


def continue_global(
    data: InitialData,
    params: ModelParams,
    grid: GridSpec,
    picard: PicardConfig | None = None,
    horizon: float = cfg.HORIZON,
    quad: QuadraturePolicy | None = None,
    levi_depth: int = cfg.LEVI_DEPTH,
    reaction_shift: float = 0.0,
) -> tuple:
    """
    March windows [T_k, T_k + T] until horizon.

    Each window restarts from u(·, T_k) with the original fuel y0 and the
    reaction integrals I_i(·, T_k) as offset.

    Returns
    -------
    (SystemState over [0, horizon], GlobalReport) — the report's table has
    one row per window: t_start, t_end, iterations, sup_dx_u1, sup_dx_u2,
    lp_u1, lp_u2, lp_window, clip_nodes, clip_min (negative nodes zeroed
    before the next window starts)
    """
    if not horizon > 0:
        raise ConfigurationError("horizon must be positive")
    x = _check_grid(data, grid)
    states, report, rows = [], GlobalReport(), []
    t0 = 0.0
    window_data = data
    i_offset = None
    env_lip = None
    while t0 < horizon * (1.0 - 1e-12):
        g = grid.with_window(min(grid.T, horizon - t0))
        state, rep = picard_solve(window_data, params, g, picard, quad, levi_depth, i_offset, t0, reaction_shift)
        states.append(state)
        report.windows.append(rep)
        if env_lip is None:
            u_max = float(max(state.u1.max(), state.u2.max()))
            env_lip = reaction_lipschitz(params, u_max, (data.y0_sup(1), data.y0_sup(2)))
        rows.append({
            "window":     len(states) - 1,
            "t_start":    float(state.t[0]),
            "t_end":      float(state.t[-1]),
            "iterations": rep.iterations,
            "sup_dx_u1":  float(_sup_dx(state.u1, x).max()),
            "sup_dx_u2":  float(_sup_dx(state.u2, x).max()),
            "lp_u1":      float(lp_norm(state.u1, x, grid.p).max()),
            "lp_u2":      float(lp_norm(state.u2, x, grid.p).max()),
            "lp_window":  lp_invariant_window(cfg.LP_KBAR, max(env_lip)),
        })
        logger.info("window %d done: [%.4g, %.4g] in %d iterations",
                    len(states) - 1, state.t[0], state.t[-1], rep.iterations)
        t0 = float(state.t[-1])
        last = state.final()
        clipped = [clip_restart(last[f"u{i}"]) for i in (1, 2)]
        u_next = [c[0] for c in clipped]
        rows[-1]["clip_nodes"] = sum(c[1] for c in clipped)
        rows[-1]["clip_min"] = min(c[2] for c in clipped)
        if rows[-1]["clip_nodes"]:
            log = logger.warning if rows[-1]["clip_min"] < -cfg.CHECK_TOL else logger.info
            log("window %d: clipped %d negative temperature nodes at restart (min %.3e)",
                len(states) - 1, rows[-1]["clip_nodes"], rows[-1]["clip_min"])
        window_data = InitialData.from_profiles(x, u_next[0], u_next[1], data.y0(1), data.y0(2))
        i_offset = (last["I1"], last["I2"])
    report.table = pd.DataFrame(rows).set_index("window")
    return SystemState.concat(states), report


def norms_table(state: SystemState, env: UpperSolution, p: float = cfg.GRID_P) -> pd.DataFrame:
    """
    Per-level norm trace (norms.csv).

    Columns: t, sup_u1, sup_u2, lp_u1, lp_u2, sup_dx_u1, sup_dx_u2, phi
    """
    x = state.x
    return pd.DataFrame({
        "t":         state.t,
        "sup_u1":    np.max(np.abs(state.u1), axis=1),
        "sup_u2":    np.max(np.abs(state.u2), axis=1),
        "lp_u1":     lp_norm(state.u1, x, p),
        "lp_u2":     lp_norm(state.u2, x, p),
        "sup_dx_u1": _sup_dx(state.u1, x),
        "sup_dx_u2": _sup_dx(state.u2, x),
        "phi":       np.atleast_1d(phi_upper(state.t, env)),
    })


# ---------------------------------------------------------------------------
# Standalone smoke test
# ---------------------------------------------------------------------------
if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    from data.profiles import initial_data_from_specs
    from models.combustion import upper_solution

    params = ModelParams.synthetic()
    grid = GridSpec(nx=32, nt=5, T=0.1)
    data = initial_data_from_specs(grid.x(), cfg.DEFAULT_PROFILES)
    state, report = picard_solve(data, params, grid)
    print(report.to_frame().to_string(index=False))
    print(norms_table(state, upper_solution(data, params)).to_string(index=False))
    print("\n[solver.py] OK")
