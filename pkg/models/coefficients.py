"""
models/coefficients.py — Parabolic Coefficient Fields
=====================================================
Coefficient triples v = (a, b, c) of the operator

  ℒu = u_t − a(x,t) u_xx + b(x,t) u_x + c(x,t) u

with their ellipticity bounds λ₀ ≤ a ≤ λ₁ and Hölder data. Fields are plain
callables f(x, t) that broadcast; two concrete kinds are provided:

  ConstantField — a single value everywhere
  LatticeField  — grid samples, piecewise-linear in x and t, constant outside

The discrete Hölder quotient used by both the coefficient checks and the
solver's C^{1,1/2} norm estimate also lives here.
"""

from __future__ import annotations

import logging
import os
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import RegularGridInterpolator

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg
from models.errors import CoefficientBoundsError, ConfigurationError

logger = logging.getLogger(__name__)

_BOUND_ATOL = 1e-12


class ConstantField:
    """f(x, t) = value."""

    is_constant = True

    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, x, t):
        shape = np.broadcast(np.asarray(x), np.asarray(t)).shape
        return np.full(shape, self.value)

    def __repr__(self):
        return f"ConstantField({self.value!r})"


class LatticeField:
    """
    Field sampled on a (t, x) lattice; piecewise-linear inside, constant
    extension outside the sampled rectangle.

    Parameters
    ----------
    x      : (nx,) increasing spatial nodes
    t      : (nt,) increasing time levels
    values : (nt, nx) samples
    """

    def __init__(self, x, t, values):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape != (t.size, x.size):
            raise ConfigurationError(f"LatticeField values {values.shape} do not match ({t.size}, {x.size})")
        if t.size == 1:
            # one level: time-constant field
            t = np.array([t[0], t[0] + 1.0])
            values = np.vstack([values, values])
        self.x, self.t, self.values = x, t, values
        self.is_constant = bool(np.ptp(values) == 0.0)
        self._interp = RegularGridInterpolator((t, x), values, method="linear")

    def __call__(self, x, t):
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        if self.is_constant:
            return np.full(x.shape, self.values[0, 0])
        xc = np.clip(x, self.x[0], self.x[-1])
        tc = np.clip(t, self.t[0], self.t[-1])
        pts = np.stack([tc.ravel(), xc.ravel()], axis=-1)
        return self._interp(pts).reshape(x.shape)


def _as_field(f) -> Callable:
    if callable(f):
        return f
    return ConstantField(f)


@dataclass(frozen=True, eq=False)
class ParabolicCoefficients:
    """
    Coefficient triple with its parabolicity and Hölder class.

    Fields
    ------
    a, b, c      : callables (x, t) -> ndarray
    lambda0      : ellipticity floor
    lambda1      : diffusion ceiling
    holder_alpha : Hölder exponent in (0, 1]
    holder_R     : bound on the C^{α,α/2} norms (B(R, λ, α) radius)
    horizon      : end of the time interval [0, horizon]
    domain       : spatial window (lo, hi) used for sampling checks and tail fits
    """

    a: Callable
    b: Callable
    c: Callable
    lambda0: float
    lambda1: float
    holder_alpha: float = 1.0
    holder_R: float = float("inf")
    horizon: float = 1.0
    domain: tuple = (-5.0, 5.0)

    def __post_init__(self):
        object.__setattr__(self, "a", _as_field(self.a))
        object.__setattr__(self, "b", _as_field(self.b))
        object.__setattr__(self, "c", _as_field(self.c))
        if not (0 < self.lambda0 <= self.lambda1 < np.inf):
            raise ConfigurationError(f"need 0 < lambda0 <= lambda1, got {self.lambda0}, {self.lambda1}")
        if not (0 < self.holder_alpha <= 1):
            raise ConfigurationError("holder_alpha must lie in (0, 1]")
        if self.horizon <= 0:
            raise ConfigurationError("horizon must be positive")
        if self.domain[1] <= self.domain[0]:
            raise ConfigurationError("domain must be an increasing pair")

    @classmethod
    def constant(cls, a: float, b: float = 0.0, c: float = 0.0, **kwargs) -> "ParabolicCoefficients":
        return cls(ConstantField(a), ConstantField(b), ConstantField(c), lambda0=a, lambda1=a, **kwargs)

    @classmethod
    def from_lattice(cls, x, t, a, b, c=None, **kwargs) -> "ParabolicCoefficients":
        """Lattice-backed fields; λ bounds default to the sampled range of a."""
        a = np.asarray(a, dtype=float)
        c = np.zeros_like(a) if c is None else c
        kwargs.setdefault("lambda0", float(a.min()))
        kwargs.setdefault("lambda1", float(a.max()))
        kwargs.setdefault("horizon", float(np.max(t)))
        kwargs.setdefault("domain", (float(np.min(x)), float(np.max(x))))
        return cls(LatticeField(x, t, a), LatticeField(x, t, b), LatticeField(x, t, c), **kwargs)

    @property
    def a_constant(self) -> bool:
        return bool(getattr(self.a, "is_constant", False))

    def sample_grid(self, nx: int = 33, nt: int = 17) -> tuple[np.ndarray, np.ndarray]:
        return np.linspace(*self.domain, nx), np.linspace(0.0, self.horizon, nt)

    def validate(self, nx: int = 33, nt: int = 17) -> dict:
        """
        Check λ₀ ≤ a ≤ λ₁ and the Hölder quotients on a sample lattice.

        Raises
        ------
        CoefficientBoundsError when a sample violates a declared bound.
        """
        xs, ts = self.sample_grid(nx, nt)
        X, T = np.meshgrid(xs, ts)
        a = self.a(X, T)
        if not np.all(np.isfinite(a)):
            raise CoefficientBoundsError("diffusion coefficient has non-finite samples")
        if a.min() < self.lambda0 - _BOUND_ATOL or a.max() > self.lambda1 + _BOUND_ATOL:
            raise CoefficientBoundsError(
                f"a in [{a.min():.6g}, {a.max():.6g}] leaves [{self.lambda0:.6g}, {self.lambda1:.6g}]"
            )
        norms = {}
        for name in ("a", "b", "c"):
            vals = getattr(self, name)(X, T)
            norms[name] = holder_norm(vals, xs, ts, self.holder_alpha, n_random=0)
            if norms[name] > self.holder_R + _BOUND_ATOL:
                raise CoefficientBoundsError(
                    f"Hölder norm of {name} = {norms[name]:.6g} exceeds R = {self.holder_R:.6g}"
                )
        return {"a_min": float(a.min()), "a_max": float(a.max()), **{f"holder_{k}": v for k, v in norms.items()}}


# ---------------------------------------------------------------------------
# Discrete Hölder quotients
# ---------------------------------------------------------------------------
def holder_quotient(
    values: np.ndarray,
    x: np.ndarray,
    t: np.ndarray,
    alpha: float = 1.0,
    n_random: int = cfg.HOLDER_RANDOM_PAIRS,
    seed: int = cfg.RANDOM_SEED,
) -> float:
    """
    max |v(p) − v(q)| / (|Δx|^α + |Δt|^{α/2}) over node pairs.

    Pairs: every axis-adjacent pair plus n_random distinct random pairs drawn
    with a seeded generator.

    Parameters
    ----------
    values : (nt, nx) field samples
    x, t   : lattice coordinates
    alpha  : Hölder exponent
    """
    v = np.atleast_2d(np.asarray(values, dtype=float))
    x = np.asarray(x, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    best = 0.0
    if v.shape[1] > 1:
        q = np.abs(np.diff(v, axis=1)) / np.diff(x)[None, :] ** alpha
        best = max(best, float(q.max()))
    if v.shape[0] > 1:
        q = np.abs(np.diff(v, axis=0)) / np.diff(t)[:, None] ** (alpha / 2.0)
        best = max(best, float(q.max()))
    if n_random > 0 and v.size > 2:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, v.size, size=n_random)
        j = rng.integers(0, v.size, size=n_random)
        keep = i != j
        i, j = i[keep], j[keep]
        ti, xi = np.unravel_index(i, v.shape)
        tj, xj = np.unravel_index(j, v.shape)
        denom = np.abs(x[xi] - x[xj]) ** alpha + np.abs(t[ti] - t[tj]) ** (alpha / 2.0)
        num = np.abs(v.ravel()[i] - v.ravel()[j])
        if denom.size:
            best = max(best, float(np.max(num / denom)))
    return best


def holder_norm(values, x, t, alpha: float = 1.0, n_random: int = cfg.HOLDER_RANDOM_PAIRS,
                seed: int = cfg.RANDOM_SEED) -> float:
    """sup|v| + holder_quotient(v)."""
    v = np.asarray(values, dtype=float)
    return float(np.max(np.abs(v))) + holder_quotient(v, x, t, alpha, n_random, seed)
