"""
models/combustion.py — Two-Layer Combustion Constitutive Model
==============================================================
Constitutive functions of the two-layer porous-media combustion system:

  (u_i)_t − α_i(y_i)(u_i)_xx + β_i(y_i)(u_i)_x = f_i(y_i, u_1, u_2)
  (y_i)_t = −A_i y_i f̃(u_i)

with α_i(y) = λ_i/(a_i+b_i y), β_i(y) = c_i/(a_i+b_i y) and the zero-extended
Arrhenius rate f̃(s) = exp(−E/s) for s > 0.

Also holds the closed-form fuel solution y_i = y0_i·exp(−A_i ∫f̃(u_i)), the
upper-solution envelope φ(t) = (M+β)e^{αt} − β and the Lipschitz bounds of f_i
on the sector box used by the Gronwall-type checks.

Every function is pure and accepts scalars or numpy arrays.
"""

from __future__ import annotations

import logging
import os
import sys
from dataclasses import dataclass, fields

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg
from models.errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

_LIP_ATOL = 1e-12


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the two-layer system; all strictly positive."""

    lambda_1: float
    lambda_2: float
    a_1: float
    a_2: float
    b_1: float
    b_2: float
    c_1: float
    c_2: float
    d_1: float
    d_2: float
    A_1: float
    A_2: float
    q: float
    E: float

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigurationError(f"ModelParams.{f.name} must be positive, got {value!r}")

    @classmethod
    def synthetic(cls, **overrides) -> "ModelParams":
        """Order-1 synthetic constants from config, optionally overridden."""
        values = dict(cfg.MODEL_PARAMS)
        unknown = set(overrides) - set(values)
        if unknown:
            raise ConfigurationError(f"unknown model parameters: {sorted(unknown)}")
        values.update(overrides)
        return cls(**values)

    def layer(self, i: int) -> dict:
        """Per-layer constants {lam, a, b, c, d, A} for layer i ∈ {1, 2}."""
        if i not in (1, 2):
            raise DomainError(f"layer index must be 1 or 2, got {i!r}")
        return {
            "lam": getattr(self, f"lambda_{i}"),
            "a":   getattr(self, f"a_{i}"),
            "b":   getattr(self, f"b_{i}"),
            "c":   getattr(self, f"c_{i}"),
            "d":   getattr(self, f"d_{i}"),
            "A":   getattr(self, f"A_{i}"),
        }


def lipschitz_quotient(x: np.ndarray, values: np.ndarray) -> float:
    """Maximum adjacent difference quotient of a sampled profile."""
    x = np.asarray(x, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(values)) / np.diff(x)))


@dataclass(frozen=True, eq=False)
class InitialData:
    """
    Initial temperatures and fuel sampled on the spatial grid.

    Fields
    ------
    x         : (nx,) spatial nodes, strictly increasing
    u0_1/u0_2 : initial temperatures (nonnegative)
    y0_1/y0_2 : initial fuel (nonnegative)
    lip_bound : Lipschitz estimate per profile, order (u0_1, u0_2, y0_1, y0_2)
    """

    x: np.ndarray
    u0_1: np.ndarray
    u0_2: np.ndarray
    y0_1: np.ndarray
    y0_2: np.ndarray
    lip_bound: tuple

    def __post_init__(self):
        for name in ("x",) + self.profile_names:
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "lip_bound", tuple(float(v) for v in self.lip_bound))
        x = self.x
        if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
            raise ConfigurationError("InitialData.x must be a strictly increasing 1-D grid")
        for name, lip in zip(self.profile_names, self.lip_bound):
            prof = np.asarray(getattr(self, name), dtype=float)
            if prof.shape != x.shape:
                raise ConfigurationError(f"InitialData.{name} has shape {prof.shape}, grid has {x.shape}")
            if not np.all(np.isfinite(prof)):
                raise ConfigurationError(f"InitialData.{name} contains non-finite values")
            if np.any(prof < 0):
                raise DomainError(f"InitialData.{name} must be nonnegative (min {prof.min():.3g})")
            if lipschitz_quotient(x, prof) > lip + _LIP_ATOL:
                raise ConfigurationError(f"InitialData.{name} exceeds its Lipschitz bound {lip:.6g}")

    profile_names = ("u0_1", "u0_2", "y0_1", "y0_2")

    @classmethod
    def from_profiles(cls, x, u0_1, u0_2, y0_1, y0_2) -> "InitialData":
        """Build from sampled profiles, measuring the Lipschitz bounds on the grid."""
        x = np.asarray(x, dtype=float)
        profs = [np.asarray(p, dtype=float) for p in (u0_1, u0_2, y0_1, y0_2)]
        lips = tuple(lipschitz_quotient(x, p) for p in profs)
        return cls(x, *profs, lip_bound=lips)

    def u0(self, i: int) -> np.ndarray:
        return np.asarray(self.u0_1 if i == 1 else self.u0_2, dtype=float)

    def y0(self, i: int) -> np.ndarray:
        return np.asarray(self.y0_1 if i == 1 else self.y0_2, dtype=float)

    def y0_sup(self, i: int) -> float:
        return float(np.max(self.y0(i)))

    def lipschitz_norm(self, values: np.ndarray) -> float:
        """‖g‖_1 = sup|g| + Lipschitz quotient (discrete)."""
        return float(np.max(np.abs(values))) + lipschitz_quotient(self.x, values)


@dataclass(frozen=True)
class UpperSolution:
    """Envelope φ(t) = (M+β)e^{αt} − β of the sector ⟨0, φ⟩."""

    M: float
    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("M", "alpha", "beta"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"UpperSolution.{name} must be >= 0")


# ---------------------------------------------------------------------------
# Arrhenius kinetics
# ---------------------------------------------------------------------------
def arrhenius_tilde(s, E: float = cfg.MODEL_PARAMS["E"]):
    """
    Zero-extended Arrhenius rate: exp(−E/s) for s > 0, 0 for s ≤ 0.

    Parameters
    ----------
    s : float | ndarray — temperature
    E : float — activation energy

    Returns
    -------
    float | ndarray in [0, 1)
    """
    s = np.asarray(s, dtype=float)
    pos = s > 0
    safe = np.where(pos, s, 1.0)
    with np.errstate(over="ignore", divide="ignore"):
        out = np.where(pos, np.exp(-E / safe), 0.0)
    return out if out.ndim else float(out)


def arrhenius_tilde_deriv(s, E: float = cfg.MODEL_PARAMS["E"]):
    """(E/s²)·exp(−E/s) for s > 0, 0 for s ≤ 0. Peaks at s = E/2 with (4/E)e^{-2}."""
    s = np.asarray(s, dtype=float)
    pos = s > 0
    safe = np.where(pos, s, 1.0)
    # log form keeps tiny s from producing inf * 0
    with np.errstate(over="ignore", divide="ignore"):
        out = np.where(pos, np.exp(np.log(E) - 2.0 * np.log(safe) - E / safe), 0.0)
    return out if out.ndim else float(out)


def arrhenius_deriv_max(E: float) -> float:
    """Global maximum of arrhenius_tilde_deriv."""
    return 4.0 / E * np.exp(-2.0)


# ---------------------------------------------------------------------------
# Constitutive coefficients
# ---------------------------------------------------------------------------
def _check_fuel(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError(f"fuel must be nonnegative (min {np.min(y):.3g})")
    return y


def _scalar(out):
    return out if np.ndim(out) else float(out)


def alpha_coeff(i: int, y, p: ModelParams):
    """Diffusion coefficient α_i(y) = λ_i/(a_i + b_i y)."""
    k = p.layer(i)
    y = _check_fuel(y)
    return _scalar(k["lam"] / (k["a"] + k["b"] * y))


def beta_coeff(i: int, y, p: ModelParams):
    """Convection coefficient β_i(y) = c_i/(a_i + b_i y)."""
    k = p.layer(i)
    y = _check_fuel(y)
    return _scalar(k["c"] / (k["a"] + k["b"] * y))


def reaction_f(i: int, y, u1, u2, p: ModelParams):
    """
    Reaction term of layer i.

    f_i = (b_i A_i u_i + d_i)/(a_i + b_i y)·y·f̃(u_i) + (−1)^i q (u_1 − u_2)/(a_i + b_i y)

    Parameters
    ----------
    i      : int — layer index (1 or 2)
    y      : fuel of layer i (≥ 0)
    u1, u2 : temperatures of both layers
    p      : ModelParams

    Returns
    -------
    float | ndarray broadcast over the inputs
    """
    k = p.layer(i)
    y = _check_fuel(y)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    ui = u1 if i == 1 else u2
    denom = k["a"] + k["b"] * y
    burn = (k["b"] * k["A"] * ui + k["d"]) / denom * y * arrhenius_tilde(ui, p.E)
    coupling = (-1) ** i * p.q * (u1 - u2) / denom
    return _scalar(burn + coupling)


def fuel_from_history(y0, I, A: float):
    """
    Closed-form fuel y = y0·exp(−A·I), I = ∫₀ᵗ f̃(u_i) dτ.

    Raises DomainError for negative I or negative y0.
    """
    y0 = _check_fuel(y0)
    I = np.asarray(I, dtype=float)
    if np.any(I < 0):
        raise DomainError(f"reaction integral must be nonnegative (min {np.min(I):.3g})")
    return _scalar(y0 * np.exp(-A * I))


# ---------------------------------------------------------------------------
# Upper solution and sector bounds
# ---------------------------------------------------------------------------
def upper_solution(data: InitialData, p: ModelParams) -> UpperSolution:
    """(M, α, β) from the sup norms of the initial data."""
    M = max(float(np.max(data.u0(1))), float(np.max(data.u0(2))))
    alpha = max(
        p.layer(i)["A"] * p.layer(i)["b"] * data.y0_sup(i) / p.layer(i)["a"] for i in (1, 2)
    )
    beta = max(p.layer(i)["d"] / (p.layer(i)["A"] * p.layer(i)["b"]) for i in (1, 2))
    return UpperSolution(M=M, alpha=alpha, beta=beta)


def phi_upper(t, env: UpperSolution):
    """φ(t) = (M+β)e^{αt} − β; rejects t < 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("phi_upper requires t >= 0")
    return _scalar((env.M + env.beta) * np.exp(env.alpha * t) - env.beta)


def phi_upper_deriv(t, env: UpperSolution):
    t = np.asarray(t, dtype=float)
    return _scalar(env.alpha * (env.M + env.beta) * np.exp(env.alpha * t))


def upper_solution_residual(t, env: UpperSolution, data: InitialData, p: ModelParams):
    """
    min_i [φ′(t) − f_i(‖y0_i‖∞, φ(t), φ(t))]; nonnegative when φ is an upper solution.
    """
    phi = phi_upper(t, env)
    dphi = phi_upper_deriv(t, env)
    gaps = [dphi - reaction_f(i, data.y0_sup(i), phi, phi, p) for i in (1, 2)]
    return _scalar(np.minimum(gaps[0], gaps[1]))


def reaction_lipschitz(p: ModelParams, u_max: float, y_max: tuple) -> tuple:
    """
    Per-layer Lipschitz bound of f_i in (u_1, u_2) on [0, u_max]² × [0, y_max_i].

    |∂f_i/∂u_i| ≤ (b_i A_i y + (b_i A_i u_max + d_i)·y·max f̃′ + q)/a_i
    |∂f_i/∂u_j| ≤ q/a_i
    """
    kmax = arrhenius_deriv_max(p.E)
    bounds = []
    for i, y in zip((1, 2), y_max):
        k = p.layer(i)
        own = (k["b"] * k["A"] * y + (k["b"] * k["A"] * u_max + k["d"]) * y * kmax + p.q) / k["a"]
        cross = p.q / k["a"]
        bounds.append(own + cross)
    return tuple(bounds)


def lp_invariant_window(kbar: float, lipschitz: float) -> float:
    """Window T̄ = 1/(4·K̄·L) on which the Lᵖ ball of radius 2K̄‖u0‖ₚ is preserved."""
    if kbar <= 0 or lipschitz <= 0:
        return float("inf")
    return 1.0 / (4.0 * kbar * lipschitz)


def model_summary_table(p: ModelParams, data: InitialData, horizon: float) -> pd.DataFrame:
    """Per-layer coefficient ranges and envelope values."""
    env = upper_solution(data, p)
    rows = []
    for i in (1, 2):
        ysup = data.y0_sup(i)
        rows.append({
            "layer":       i,
            "alpha_min":   alpha_coeff(i, ysup, p),
            "alpha_max":   alpha_coeff(i, 0.0, p),
            "beta_min":    beta_coeff(i, ysup, p),
            "beta_max":    beta_coeff(i, 0.0, p),
            "u0_sup":      float(np.max(data.u0(i))),
            "y0_sup":      ysup,
            "phi_horizon": phi_upper(horizon, env),
        })
    return pd.DataFrame(rows).set_index("layer")


# ---------------------------------------------------------------------------
# Standalone smoke test
# ---------------------------------------------------------------------------
if __name__ == "__main__":
    params = ModelParams.synthetic()
    x = np.linspace(-cfg.GRID_HALF_WIDTH, cfg.GRID_HALF_WIDTH, cfg.GRID_NX)
    bump = np.exp(-x**2)
    data = InitialData.from_profiles(x, bump, 0.8 * bump, np.ones_like(x), np.ones_like(x))
    env = upper_solution(data, params)

    print(f"f̃(E) = {arrhenius_tilde(params.E):.6f}")
    print(f"Envelope: M={env.M:.3f}  alpha={env.alpha:.3f}  beta={env.beta:.3f}")
    print(f"phi(horizon) = {phi_upper(cfg.HORIZON, env):.4f}")
    print(f"Upper-solution residual at t=0: {upper_solution_residual(0.0, env, data, params):.4e}")
    print(model_summary_table(params, data, cfg.HORIZON).to_string())
    print("\n[combustion.py] OK")
