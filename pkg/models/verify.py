"""
models/verify.py — Runtime Certificates
=======================================
Post-hoc checks that turn the existence, sector, comparison and stability
statements for the two-layer system into pass/fail reports on solved
trajectories and on kernel objects:

  sector        −tol ≤ u_i ≤ φ(t) + tol
  fuel          0 ≤ y_i ≤ ‖y0_i‖∞, y_i nonincreasing in t
  quadrant      u_i ≥ −tol (nodewise nonnegativity)
  comparison    u^{−δ} ≤ u ≤ u^{+δ}, gap linear in δ
  lp_envelope   ‖u_1‖ₚ + ‖u_2‖ₚ ≤ C₁(1 + C₂te^{C₂t})
  gradient      sup|∂ₓu_i| does not grow; edge values stay small
  continuity    sup|Δu|/√Δt finite and below a ceiling
  stability     linear-solve gap shrinks with the coefficient perturbation

Checks never raise on failure; they return a CheckReport whose
worst_violation exceeds its tolerance exactly when passed is False.
"""

from __future__ import annotations

import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg
from data.grid import GridSpec, SystemState
from models.coefficients import ParabolicCoefficients
from models.combustion import (
    InitialData,
    ModelParams,
    UpperSolution,
    alpha_coeff,
    beta_coeff,
    phi_upper,
    reaction_lipschitz,
    upper_solution,
)
from models.kernel import (
    KernelHandle,
    QuadraturePolicy,
    apply_gamma,
    eval_gamma,
    eval_Z,
    pde_residual,
    propagate,
    semigroup_gap,
    worker_count,
)
from models.solver import PicardConfig, holder_norm_estimate, lp_norm, picard_solve

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    worst_violation: float
    location: tuple = ()
    tolerance: float = cfg.CHECK_TOL
    notes: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        return {
            "check":           self.name,
            "passed":          self.passed,
            "worst_violation": self.worst_violation,
            "location":        " ".join(str(v) for v in self.location),
            "tolerance":       self.tolerance,
            "notes":           "; ".join(f"{k}={_fmt(v)}" for k, v in self.notes.items()),
        }


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{v:.6g}"
    return str(v)


def _report(name: str, violation: float, location: tuple, tol: float, **notes) -> CheckReport:
    violation = float(violation) if np.isfinite(violation) else float("inf")
    passed = violation <= tol
    level = logging.INFO if passed else logging.WARNING
    logger.log(level, "check %s: %s (worst %.3e, tol %.1e)", name, "pass" if passed else "FAIL", violation, tol)
    return CheckReport(name, passed, violation, location, tol, notes)


def _worst(fields: dict, state: SystemState) -> tuple:
    """Largest value over named (nt, nx) arrays with its (field, t, x) location."""
    best, where = -np.inf, ()
    for name, arr in fields.items():
        arr = np.where(np.isfinite(arr), arr, np.inf)
        k = np.unravel_index(int(np.argmax(arr)), arr.shape)
        if arr[k] > best:
            best = float(arr[k])
            where = (name, float(state.t[k[0]]), float(state.x[k[1]]))
    return best, where


# ---------------------------------------------------------------------------
# State checks
# ---------------------------------------------------------------------------
def check_sector(state: SystemState, env: UpperSolution, tol: float = cfg.CHECK_TOL) -> CheckReport:
    """0 ≤ u_i ≤ φ(t) at every node, up to tol."""
    phi = np.atleast_1d(phi_upper(state.t, env))[:, None]
    excess = {}
    for i in (1, 2):
        u = state.u(i)
        excess[f"u{i}"] = np.maximum(-u, u - phi)
    worst, where = _worst(excess, state)
    return _report("sector", max(worst, 0.0), where, tol, phi_end=float(phi[-1, 0]))


def check_fuel(state: SystemState, data: InitialData, tol: float = cfg.CHECK_TOL) -> CheckReport:
    """0 ≤ y_i ≤ ‖y0_i‖∞ nodewise and y_i nonincreasing along time."""
    excess = {}
    for i in (1, 2):
        y = state.y(i)
        bound = np.maximum(-y, y - data.y0_sup(i))
        rise = np.vstack([np.zeros((1, y.shape[1])), np.diff(y, axis=0)])
        excess[f"y{i}"] = np.maximum(bound, rise)
    worst, where = _worst(excess, state)
    return _report("fuel", max(worst, 0.0), where, tol)


def check_quadrant(state: SystemState, tol: float = cfg.CHECK_TOL) -> CheckReport:
    """Nodewise u_i ≥ −tol."""
    worst, where = _worst({f"u{i}": -state.u(i) for i in (1, 2)}, state)
    return _report("quadrant", max(worst, 0.0), where, tol)


def check_lp_envelope(
    state: SystemState,
    grid: GridSpec,
    params: ModelParams,
    tol: float = cfg.CHECK_TOL,
    p: float | None = None,
) -> CheckReport:
    """
    N(t) = ‖u_1‖ₚ + ‖u_2‖ₚ against the Gronwall envelope C₁(1 + C₂te^{C₂t}).

    C₁ = LP_KBAR·N(0); C₂ is the summed reaction Lipschitz bound on the
    sector box [0, max u]² × [0, max y(0)]. The violation is the largest
    relative excess N/envelope − 1.
    """
    p = grid.p if p is None else p
    x = state.x
    norm = lp_norm(state.u1, x, p) + lp_norm(state.u2, x, p)
    u_max = float(max(state.u1.max(), state.u2.max(), 0.0))
    lips = reaction_lipschitz(params, u_max, (float(state.y1[0].max()), float(state.y2[0].max())))
    C1 = cfg.LP_KBAR * norm[0]
    C2 = float(sum(lips))
    s = state.t - state.t[0]
    envelope = C1 * (1.0 + C2 * s * np.exp(C2 * s))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(envelope > 0, norm / envelope - 1.0, np.where(norm > 0, np.inf, -1.0))
    k = int(np.argmax(rel))
    return _report(f"lp_envelope_p{p:g}", max(float(rel[k]), 0.0), (float(state.t[k]),), tol,
                   C1=C1, C2=C2, p=p, norm_end=float(norm[-1]))


def gradient_trace(state: SystemState) -> pd.DataFrame:
    """Per-level sup|∂ₓu_i| and edge magnitudes."""
    rows = {"t": state.t}
    for i in (1, 2):
        u = state.u(i)
        rows[f"sup_dx_u{i}"] = np.max(np.abs(np.gradient(u, state.x, axis=1)), axis=1)
        rows[f"edge_u{i}"] = np.maximum(np.abs(u[:, 0]), np.abs(u[:, -1]))
        rows[f"sup_u{i}"] = np.max(np.abs(u), axis=1)
    return pd.DataFrame(rows)


def check_gradient_bound(state: SystemState, grid: GridSpec) -> CheckReport:
    """
    No growth of sup|∂ₓu_i| (final window ≤ GRADIENT_GROWTH × first window)
    and edge values ≤ EDGE_FRACTION × interior maximum. The edge test is the
    finite-grid stand-in for decay at infinity.
    """
    trace = gradient_trace(state)
    dx = np.maximum(trace["sup_dx_u1"], trace["sup_dx_u2"]).to_numpy()
    s = state.t - state.t[0]
    first = s <= grid.T * (1 + 1e-12)
    final = s >= s[-1] - grid.T * (1 + 1e-12)
    first_max, final_max = float(dx[first].max()), float(dx[final].max())
    growth = max(final_max - cfg.GRADIENT_GROWTH * first_max, 0.0)
    edge = np.maximum(trace["edge_u1"], trace["edge_u2"]).to_numpy()
    interior = float(np.maximum(trace["sup_u1"], trace["sup_u2"]).max())
    edge_excess = max(float(edge.max()) - cfg.EDGE_FRACTION * interior, 0.0)
    k = int(np.argmax(dx))
    return _report("gradient", max(growth, edge_excess), (float(state.t[k]),), cfg.CHECK_TOL,
                   sup_dx_first=first_max, sup_dx_final=final_max,
                   edge_max=float(edge.max()), interior_max=interior)


def check_time_continuity(state: SystemState, tol: float = cfg.CONTINUITY_CEILING) -> CheckReport:
    """max_n sup_x |u(·,t_{n+1}) − u(·,t_n)|/√Δt, reported against a runaway ceiling."""
    dt = np.diff(state.t)
    quot = np.zeros(dt.size)
    for i in (1, 2):
        quot = np.maximum(quot, np.max(np.abs(np.diff(state.u(i), axis=0)), axis=1) / np.sqrt(dt))
    quot = np.where(np.isfinite(quot), quot, np.inf)
    k = int(np.argmax(quot)) if quot.size else 0
    worst = float(quot[k]) if quot.size else 0.0
    return _report("continuity", worst, (float(state.t[k]),), tol)


def corrupt_state(state: SystemState, name: str = "u1", node: tuple = (-1, None), value: float = -1.0) -> SystemState:
    """Copy of state with one node overwritten (fault injection); node x defaults to the centre."""
    arr = np.array(getattr(state, name))
    t_idx, x_idx = node
    arr[t_idx, arr.shape[1] // 2 if x_idx is None else x_idx] = value
    return state.with_fields(**{name: arr})


# ---------------------------------------------------------------------------
# Re-solving checks
# ---------------------------------------------------------------------------
def check_comparison(
    data: InitialData,
    params: ModelParams,
    grid: GridSpec,
    picard: PicardConfig | None = None,
    delta: float = cfg.COMPARISON_DELTA,
    tol: float = cfg.CHECK_TOL,
    quad: QuadraturePolicy | None = None,
    levi_depth: int = cfg.LEVI_DEPTH,
    ratio_range: tuple = cfg.COMPARISON_RATIO,
) -> CheckReport:
    """
    Ordering u^{−δ} ≤ u ≤ u^{+δ} with reactions f_i ± δ, and the linear
    dependence of the gap on δ: gap(δ)/gap(δ/2) within ratio_range.

    The unperturbed solve fixes the window; the perturbed solves reuse it.
    """
    base, rep = picard_solve(data, params, grid, picard, quad, levi_depth)
    g = grid.with_window(rep.window_T)
    deltas = (delta, delta / 2.0) if delta > 0 else (0.0,)
    order_excess = {}
    gaps = []
    for d in deltas:
        plus, _ = picard_solve(data, params, g, picard, quad, levi_depth, reaction_shift=d)
        minus, _ = picard_solve(data, params, g, picard, quad, levi_depth, reaction_shift=-d)
        if plus.t.size != base.t.size or minus.t.size != base.t.size or not np.allclose(plus.t, base.t):
            return _report("comparison", np.inf, (), tol, reason="perturbed solve shrank its window")
        for i in (1, 2):
            u = base.u(i)
            below = np.maximum(minus.u(i) - u, u - plus.u(i))
            key = f"u{i}@{d:g}"
            order_excess[key] = below
        gaps.append(max(float(np.max(np.abs(s.u(i) - base.u(i)))) for s in (plus, minus) for i in (1, 2)))
    worst, where = _worst(order_excess, base)
    notes = {"window_T": rep.window_T, "gap": gaps[0]}
    violation = max(worst, 0.0)
    if delta > 0:
        T = rep.window_T
        K = max(reaction_lipschitz(params, float(max(base.u1.max(), base.u2.max())),
                                   (data.y0_sup(1), data.y0_sup(2))))
        ratio = gaps[0] / gaps[1] if gaps[1] > 0 else np.inf
        lo, hi = ratio_range
        ratio_excess = max(lo - ratio, ratio - hi, 0.0)
        violation = max(violation, ratio_excess if np.isfinite(ratio) else np.inf)
        notes.update(gap_half=gaps[1], ratio=ratio, gronwall_bound=delta * T * np.exp(K * T))
    return _report("comparison", violation, where, tol, **notes)


def _stability_coefficients(data: InitialData, params: ModelParams, grid: GridSpec, eps: float):
    """Layer-1 coefficients frozen at y0, with a perturbed by the factor 1 + eps·sin(x)."""
    x, t = grid.x(), grid.times()
    y = np.tile(data.y0(1), (t.size, 1))
    a = alpha_coeff(1, y, params) * (1.0 + eps * np.sin(x))[None, :]
    return ParabolicCoefficients.from_lattice(x, t, a, beta_coeff(1, y, params), horizon=float(t[-1]))


def check_solution_stability(
    data: InitialData,
    params: ModelParams,
    grid: GridSpec,
    eps_values: tuple = cfg.STABILITY_EPS,
    quad: QuadraturePolicy | None = None,
    levi_depth: int = cfg.LEVI_DEPTH,
    decay: float = cfg.STABILITY_DECAY,
) -> CheckReport:
    """
    Solve ℒu = 0, u(0) = u0_1 with fixed coefficients v and v + ε-perturbation;
    require the discrete C^{1,1/2} gap to shrink by at least `decay` each time ε
    is reduced along eps_values.
    """
    quad = QuadraturePolicy.solver_grade() if quad is None else quad
    x, t = grid.x(), grid.times()

    def solve(eps):
        handle = KernelHandle(_stability_coefficients(data, params, grid, eps), levi_depth=levi_depth, quad=quad)
        u = np.empty((t.size, x.size))
        u[0] = data.u0(1)
        u[1:] = propagate(handle, x, data.u0(1), 0.0, t[1:])
        return u

    base = solve(0.0)
    gaps = []
    for eps in eps_values:
        gaps.append(0.0 if eps == 0 else holder_norm_estimate(solve(eps) - base, grid))
    excess = 0.0
    for g_big, g_small in zip(gaps, gaps[1:]):
        if g_big > 0:
            excess = max(excess, g_small / g_big - decay)
        elif g_small > 0:
            excess = np.inf
    slope = gaps[0] / eps_values[0] if eps_values[0] > 0 else 0.0
    notes = {f"gap@{e:g}": g for e, g in zip(eps_values, gaps)}
    notes["linear_fit_K"] = slope
    return _report("stability", excess, (), cfg.CHECK_TOL, **notes)


# ---------------------------------------------------------------------------
# Kernel self-test
# ---------------------------------------------------------------------------
def smooth_variable_coefficients(horizon: float = 0.5, domain: tuple = (-4 * np.pi, 4 * np.pi)) -> ParabolicCoefficients:
    """a = 1 + 0.3 sin(x)e^{−t}, b = 0.2 cos(x), c = 0."""
    return ParabolicCoefficients(
        a=lambda x, t: 1.0 + 0.3 * np.sin(x) * np.exp(-np.asarray(t)),
        b=lambda x, t: 0.2 * np.cos(x) + 0.0 * np.asarray(t),
        c=0.0,
        lambda0=0.7,
        lambda1=1.3,
        horizon=horizon,
        domain=domain,
    )


def _selftest_exactness(quad, levi_depth) -> CheckReport:
    xs = np.linspace(-2.0, 2.0, 20)
    xis = np.linspace(-2.0, 2.0, 20)
    dts = np.linspace(0.05, 1.0, 10)
    X, XI, DT = np.meshgrid(xs, xis, dts, indexing="ij")
    worst, where = 0.0, ()
    for a in (0.5, 1.0, 2.0):
        handle = KernelHandle(ParabolicCoefficients.constant(a, horizon=1.0), levi_depth=levi_depth, quad=quad)
        gap = np.abs(eval_gamma(handle, X, DT, XI, 0.0) - eval_Z(handle.coeffs, X, DT, XI, 0.0))
        k = np.unravel_index(int(np.argmax(gap)), gap.shape)
        if gap[k] >= worst:
            worst, where = float(gap[k]), (a, float(X[k]), float(DT[k]), float(XI[k]))
    return _report("exactness", worst, where, cfg.SELFTEST_EXACT_TOL)


def advection_kernel(x, dt, xi, a=1.0, b=1.5):
    """Closed-form kernel of u_t − a u_xx + b u_x = 0: Gaussian centred at ξ + b·dt."""
    d = np.asarray(x) - xi - b * dt
    return np.exp(-d * d / (4.0 * a * dt)) / np.sqrt(4.0 * np.pi * a * dt)


def _selftest_advection(quad, levi_depth) -> CheckReport:
    b = 1.5
    handle = KernelHandle(ParabolicCoefficients.constant(1.0, b=b, horizon=0.25), levi_depth=levi_depth, quad=quad)
    X, DT = np.meshgrid(np.linspace(-1.5, 1.5, 13), np.array([0.05, 0.1, 0.2]), indexing="ij")
    err = np.abs(eval_gamma(handle, X, DT, 0.0, 0.0) - advection_kernel(X, DT, 0.0, b=b))
    k = np.unravel_index(int(np.argmax(err)), err.shape)
    return _report("advection", float(err[k]), (float(X[k]), float(DT[k])), cfg.SELFTEST_ADVECTION_TOL,
                   K=handle.tail_constants[0], C=handle.tail_constants[1],
                   tail_certified=handle.tail_certified(0.2))


def _selftest_mass(quad, levi_depth) -> CheckReport:
    handle = KernelHandle(smooth_variable_coefficients(), levi_depth=levi_depth, quad=quad)
    x_grid = np.linspace(-4 * np.pi, 4 * np.pi, 161)
    interior = np.linspace(-3.0, 3.0, 10)
    times = np.linspace(0.02, 0.5, 10)
    mass = propagate(handle, x_grid, np.ones_like(x_grid), 0.0, times)
    at_interior = np.array([np.interp(interior, x_grid, row) for row in mass])
    err = np.abs(at_interior - 1.0)
    k = np.unravel_index(int(np.argmax(err)), err.shape)
    return _report("mass", float(err[k]), (float(interior[k[1]]), float(times[k[0]])), cfg.SELFTEST_MASS_TOL)


def _selftest_delta_family(quad, levi_depth) -> CheckReport:
    handle = KernelHandle(smooth_variable_coefficients(horizon=max(cfg.SELFTEST_DELTA_DT)),
                          levi_depth=levi_depth, quad=quad)
    x_grid = np.linspace(-4 * np.pi, 4 * np.pi, 161)
    interior = np.abs(x_grid) <= 2 * np.pi
    psi = np.cos(x_grid)
    errors = [
        float(np.max(np.abs(apply_gamma(handle, x_grid, psi, dt, 0.0) - psi)[interior]))
        for dt in cfg.SELFTEST_DELTA_DT
    ]
    violation = max(errors[-1] - cfg.SELFTEST_DELTA_FINAL, 0.0)
    if any(b >= a for a, b in zip(errors, errors[1:])):
        violation = np.inf
    return _report("delta_family", violation, (), cfg.CHECK_TOL,
                   **{f"err@{dt:g}": e for dt, e in zip(cfg.SELFTEST_DELTA_DT, errors)})


def _selftest_residual(quad, levi_depth) -> CheckReport:
    handle = KernelHandle(smooth_variable_coefficients(), levi_depth=levi_depth, quad=quad)
    x = np.array([-0.5, 0.0, 0.5])
    t = np.full_like(x, 0.3)
    rel = []
    for h in (0.04, 0.02):
        res = np.abs(pde_residual(handle, x, t, 0.0, 0.0, h))
        g_t = np.abs(np.asarray(eval_gamma(handle, x, t + h, 0.0, 0.0)) -
                     np.asarray(eval_gamma(handle, x, t - h, 0.0, 0.0))) / (2 * h)
        rel.append(float(np.max(res) / max(float(np.max(g_t)), 1e-300)))
    return _report("residual", rel[-1], (0.3,), cfg.SELFTEST_RESIDUAL_TOL,
                   **{"rel@0.04": rel[0], "rel@0.02": rel[1]})


def _selftest_semigroup(quad, levi_depth) -> CheckReport:
    handle = KernelHandle(smooth_variable_coefficients(), levi_depth=levi_depth, quad=quad)
    x_grid = np.linspace(-4.0, 4.0, 81)
    gap = semigroup_gap(handle, x_grid, 0.4, 0.2, 0.0, 0.0)
    return _report("semigroup", gap, (0.4, 0.2), cfg.SELFTEST_SEMIGROUP_TOL)


SELFTESTS = {
    "exactness":    _selftest_exactness,
    "advection":    _selftest_advection,
    "mass":         _selftest_mass,
    "delta_family": _selftest_delta_family,
    "residual":     _selftest_residual,
    "semigroup":    _selftest_semigroup,
}


def kernel_selftest(
    quad: QuadraturePolicy | None = None,
    levi_depth: int = cfg.LEVI_DEPTH,
    names: tuple | None = None,
) -> list:
    """Run the kernel self-test battery; one CheckReport per test."""
    quad = QuadraturePolicy() if quad is None else quad
    names = tuple(SELFTESTS) if names is None else names
    return [SELFTESTS[n](quad, levi_depth) for n in names]


# ---------------------------------------------------------------------------
# Orchestration and summaries
# ---------------------------------------------------------------------------
def run_checks(tasks: dict) -> list:
    """Run independent zero-argument check callables concurrently; order follows tasks."""
    if not tasks:
        return []
    with ThreadPoolExecutor(max_workers=min(worker_count(), len(tasks))) as pool:
        futures = [pool.submit(fn) for fn in tasks.values()]
        return [f.result() for f in futures]


def checks_table(reports: list) -> pd.DataFrame:
    """One row per report (checks.csv / kernel_selftest.csv)."""
    cols = ["check", "passed", "worst_violation", "location", "tolerance", "notes"]
    return pd.DataFrame([r.as_row() for r in reports], columns=cols)


def render_summary(reports: list) -> str:
    lines = ["Verification summary", "=" * 20]
    for r in reports:
        mark = "PASS" if r.passed else "FAIL"
        lines.append(f"  [{mark}] {r.name:<16} worst={r.worst_violation:.3e}  tol={r.tolerance:.1e}")
    n_fail = sum(not r.passed for r in reports)
    lines.append(f"{len(reports) - n_fail}/{len(reports)} checks passed")
    return "\n".join(lines)


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    from data.profiles import initial_data_from_specs

    params = ModelParams.synthetic()
    grid = GridSpec(nx=32, nt=5, T=0.1)
    data = initial_data_from_specs(grid.x())
    state, _ = picard_solve(data, params, grid)
    env = upper_solution(data, params)
    reports = [check_sector(state, env), check_fuel(state, data), check_quadrant(state),
               check_sector(corrupt_state(state), env)]
    print(render_summary(reports))
    print("\n[verify.py] OK")
