"""
models/kernel.py — Parametrix Fundamental Solution
==================================================
Fundamental solution Γ of the 1-D parabolic operator

  ℒu = u_t − a(x,t) u_xx + b(x,t) u_x + c(x,t) u

built by the Levi (parametrix) method:

  Z(x,t,ξ,τ)  heat kernel with the diffusion frozen at a(ξ,τ)
  ℒZ          = (a(ξ,τ) − a(x,t)) Z_xx + b Z_x + c Z
  (ℒZ)_{m+1}  = ∫_τ^t ∫ ℒZ(x,t,y,σ) (ℒZ)_m(y,σ,ξ,τ) dy dσ
  φ           = Σ_{m≥1} (−1)^m (ℒZ)_m
  Γ           = Z + ∫_τ^t ∫ Z(x,t,y,σ) φ(y,σ,ξ,τ) dy dσ

Two assembly shapes are provided:

  LeviLattice     — iterates around a single source (ξ, τ), stored as
                    r²·(ℒZ)_m on a similarity lattice (r = √(σ−τ),
                    z = (y−ξ)/(√(2λ₁) r)); used for pointwise Γ, ∂ₓΓ, φ.
  propagate()     — iterates already integrated against a profile g and a
                    source F, stored as r·Ψ_m on (r, x_grid); yields
                    ∫Γg dξ + ∫∫ΓF dξ dτ on a whole lattice in one pass.

Volume potentials use composite Gauss–Legendre panels in space and the
σ = τ + r² / σ = t − r² substitution in time (models/quadrature.py).
Series depth is the smallest M whose a-priori tail bound is below
LEVI_TAIL_RTOL·dt^{-1/2}, capped at the handle's levi_depth.
"""

from __future__ import annotations

import logging
import os
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import stats
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.special import gammaln, logsumexp

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg
from models.coefficients import ParabolicCoefficients
from models.errors import ConfigurationError, DomainError, KernelMismatchError, NumericalError
from models.quadrature import interval_nodes, singular_time_nodes

logger = logging.getLogger(__name__)

# depth caps already reported; one warning per cap per process
_CAP_WARNED: set = set()
_CAP_LOCK = threading.Lock()


# ---------------------------------------------------------------------------
# Policy and handle
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class QuadraturePolicy:
    """
    Node counts and truncation for every kernel integral.

    n_space, n_time   : nodes per spatial / temporal integral
    sing_exponent     : p in σ = τ + h·u^p
    domain_halfwidth  : window radius in units of √(2λ₁(t−τ))
    space_panels      : Gauss–Legendre panels in space
    time_panels       : panels per half of the time interval
    lattice_levels    : √-time levels of a Levi lattice
    lattice_nodes     : similarity nodes per level (pointwise lattices)
    """

    n_space: int = cfg.QUAD_N_SPACE
    n_time: int = cfg.QUAD_N_TIME
    sing_exponent: float = cfg.QUAD_SING_EXPONENT
    domain_halfwidth: float = cfg.QUAD_HALFWIDTH
    space_panels: int = cfg.QUAD_SPACE_PANELS
    time_panels: int = cfg.QUAD_TIME_PANELS
    lattice_levels: int = cfg.LATTICE_LEVELS
    lattice_nodes: int = cfg.LATTICE_NODES

    def __post_init__(self):
        if self.n_space < 4 or self.n_time < 4:
            raise ConfigurationError("quadrature node counts must be >= 4")
        if self.domain_halfwidth < 6:
            raise ConfigurationError("domain_halfwidth must be >= 6 Gaussian deviations")
        if self.sing_exponent < 1:
            raise ConfigurationError("sing_exponent must be >= 1")
        if self.space_panels < 1 or self.time_panels < 1:
            raise ConfigurationError("panel counts must be >= 1")
        if self.lattice_levels < 3 or self.lattice_nodes < 8:
            raise ConfigurationError("lattice needs >= 3 levels and >= 8 nodes")

    @classmethod
    def solver_grade(cls, **overrides) -> "QuadraturePolicy":
        """Cheaper policy used inside the Picard loop."""
        return cls(**{**cfg.SOLVER_QUAD, **overrides})

    def refined(self, factor: int) -> "QuadraturePolicy":
        return replace(
            self,
            n_space=self.n_space * factor,
            n_time=self.n_time * factor,
            lattice_levels=self.lattice_levels * factor,
            lattice_nodes=(self.lattice_nodes - 1) * factor + 1,
        )


@dataclass(frozen=True, eq=False)
class KernelHandle:
    """
    Configured fundamental-solution evaluator.

    Immutable after construction apart from its lattice cache, which is
    guarded by a lock; two threads may build the same lattice, the later
    insert wins and both values are identical.
    """

    coeffs: ParabolicCoefficients
    levi_depth: int = cfg.LEVI_DEPTH
    quad: QuadraturePolicy = field(default_factory=QuadraturePolicy)
    tail_constants: tuple | None = None
    tail_rtol: float = cfg.LEVI_TAIL_RTOL
    alpha_floor: float = cfg.LEVI_ALPHA_FLOOR
    _lattices: dict = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        if isinstance(self.levi_depth, bool) or not isinstance(self.levi_depth, (int, np.integer)):
            raise ConfigurationError(f"levi_depth must be an integer, got {self.levi_depth!r}")
        if self.levi_depth < 1:
            raise ConfigurationError(f"levi_depth must be >= 1, got {self.levi_depth}")
        if not self.alpha_floor >= 0:
            raise ConfigurationError(f"alpha_floor must be >= 0, got {self.alpha_floor}")
        self.coeffs.validate()
        if self.tail_constants is None:
            object.__setattr__(self, "tail_constants", fit_tail_constants(self.coeffs))
        logger.debug("kernel handle: depth cap %d, tail constants K=%.4g C=%.4g",
                     self.levi_depth, *self.tail_constants)

    def depth_for(self, dt: float) -> int:
        """Smallest M ≤ levi_depth with tail(M, dt) < tail_rtol·dt^{-1/2}."""
        target = self.tail_rtol / np.sqrt(dt)
        for m in range(1, self.levi_depth + 1):
            if levi_tail_bound(self, m, dt) < target:
                return m
        with _CAP_LOCK:
            first = self.levi_depth not in _CAP_WARNED
            _CAP_WARNED.add(self.levi_depth)
        if first:
            logger.warning("tail bound not reached at depth %d for dt=%.4g; series truncated at the cap "
                           "(result is not tail-certified)", self.levi_depth, dt)
        return self.levi_depth

    def tail_certified(self, dt: float) -> bool:
        return levi_tail_bound(self, self.depth_for(dt), dt) < self.tail_rtol / np.sqrt(dt)

    def lattice(self, xi: float, tau: float) -> "LeviLattice":
        key = (float(xi), float(tau))
        with self._lock:
            cached = self._lattices.get(key)
        if cached is not None:
            return cached
        built = LeviLattice(self, *key)
        with self._lock:
            self._lattices[key] = built
        return built


# ---------------------------------------------------------------------------
# Parallel map over targets
# ---------------------------------------------------------------------------
def worker_count() -> int:
    """Thread budget: PF_THREADS when set, else the config default."""
    raw = os.environ.get(cfg.THREADS_ENV)
    if raw is None or raw == "":
        return cfg.MAX_THREADS
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{cfg.THREADS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, n)


def _map_targets(fn, *arrays) -> np.ndarray:
    n = arrays[0].size
    if n == 0:
        return np.empty(0)
    chunks = [slice(s, min(s + cfg.TARGET_CHUNK, n)) for s in range(0, n, cfg.TARGET_CHUNK)]
    workers = min(worker_count(), len(chunks))

    def run(sl):
        return fn(*(a[sl] for a in arrays))

    if workers <= 1:
        parts = [run(sl) for sl in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# Closed-form kernels (no argument checks; callers guarantee t > tau)
# ---------------------------------------------------------------------------
def _heat_terms(a_src, d, dt):
    D = a_src * dt
    z = np.exp(-d * d / (4.0 * D)) / np.sqrt(4.0 * np.pi * D)
    zx = -d / (2.0 * D) * z
    zxx = (d * d / (4.0 * D * D) - 1.0 / (2.0 * D)) * z
    return z, zx, zxx


def _kernel_z(coeffs, x, t, xi, tau):
    return _heat_terms(coeffs.a(xi, tau), x - xi, t - tau)[0]


def _kernel_zx(coeffs, x, t, xi, tau):
    return _heat_terms(coeffs.a(xi, tau), x - xi, t - tau)[1]


def _kernel_lz(coeffs, x, t, xi, tau):
    a_src = coeffs.a(xi, tau)
    z, zx, zxx = _heat_terms(a_src, x - xi, t - tau)
    return (a_src - coeffs.a(x, t)) * zxx + coeffs.b(x, t) * zx + coeffs.c(x, t) * z


def _broadcast_checked(x, t, xi, tau):
    x, t, xi, tau = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, t, xi, tau)))
    if np.any(t <= tau):
        raise DomainError("kernel evaluation requires t > tau")
    return x, t, xi, tau


def _scalar(out):
    return out if np.ndim(out) else float(out)


def eval_Z(coeffs: ParabolicCoefficients, x, t, xi, tau):
    """
    Frozen-coefficient heat kernel.

    Z = (4π a(ξ,τ)(t−τ))^{-1/2} exp(−(x−ξ)²/(4 a(ξ,τ)(t−τ)))

    Raises DomainError when t ≤ τ.
    """
    return _scalar(_kernel_z(coeffs, *_broadcast_checked(x, t, xi, tau)))


def eval_Zx(coeffs: ParabolicCoefficients, x, t, xi, tau):
    return _scalar(_kernel_zx(coeffs, *_broadcast_checked(x, t, xi, tau)))


def eval_LZ(coeffs: ParabolicCoefficients, x, t, xi, tau):
    """First Levi iterate (a(ξ,τ) − a(x,t))Z_xx + bZ_x + cZ."""
    return _scalar(_kernel_lz(coeffs, *_broadcast_checked(x, t, xi, tau)))


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------
def _initial_potential(coeffs, quad, kernel, x, t, tau, g_fn) -> np.ndarray:
    """∫ kernel(x,t,ξ,τ) g(ξ) dξ over the Gaussian window around each target."""
    def chunk(xc, tc):
        reach = quad.domain_halfwidth * np.sqrt(2.0 * coeffs.lambda1 * (tc - tau))
        xi, w = interval_nodes(xc - reach, xc + reach, quad.n_space, quad.space_panels)
        k = kernel(coeffs, xc[:, None], tc[:, None], xi, tau)
        return np.sum(k * g_fn(xi) * w, axis=1)

    return _map_targets(chunk, np.ravel(x), np.ravel(t))


def _volume_potential(coeffs, quad, kernel, x, t, tau, density, xi=None) -> np.ndarray:
    """
    ∫_τ^t ∫ kernel(x,t,y,σ) density(y,σ) dy dσ for flat target arrays.

    With xi given, the density is known to live inside the Gaussian window
    of the source (ξ, τ) and the y-range is intersected with it.
    """
    lam = coeffs.lambda1
    W = quad.domain_halfwidth

    def chunk(xc, tc):
        sigma, ws = singular_time_nodes(tc, tau, quad.n_time, quad.time_panels, quad.sing_exponent)
        reach = W * np.sqrt(2.0 * lam * (tc[:, None] - sigma))
        lo = xc[:, None] - reach
        hi = xc[:, None] + reach
        if xi is not None:
            src = W * np.sqrt(2.0 * lam * (sigma - tau))
            lo = np.maximum(lo, xi - src)
            hi = np.minimum(hi, xi + src)
        y, wy = interval_nodes(lo, hi, quad.n_space, quad.space_panels)
        s3 = np.broadcast_to(sigma[..., None], y.shape)
        k = kernel(coeffs, xc[:, None, None], tc[:, None, None], y, s3)
        inner = np.sum(k * density(y, s3) * wy, axis=2)
        return np.sum(inner * ws, axis=1)

    return _map_targets(chunk, np.ravel(x), np.ravel(t))


def _fit_levels(r: np.ndarray, nodes: np.ndarray, vals: np.ndarray, ky: int) -> RectBivariateSpline:
    """Spline over (r, node) with the r = 0 row extrapolated linearly from levels 1 and 2."""
    row0 = 2.0 * vals[0] - vals[1]
    full = np.vstack([row0, vals])
    return RectBivariateSpline(r, nodes, full, kx=3, ky=ky, s=0)


# ---------------------------------------------------------------------------
# Pointwise Levi lattice
# ---------------------------------------------------------------------------
class LeviLattice:
    """
    Levi iterates (ℒZ)_m(·,·,ξ,τ) for one source point.

    Level k holds S_m = r_k²·(ℒZ)_m at y = ξ + z_j·√(2λ₁)·r_k, σ = τ + r_k²,
    z_j ∈ [−W, W]; outside that band every iterate is taken as zero.
    """

    def __init__(self, handle: KernelHandle, xi: float, tau: float):
        coeffs, quad = handle.coeffs, handle.quad
        span = coeffs.horizon - tau
        if span <= 0:
            raise DomainError(f"source time {tau} is not before the horizon {coeffs.horizon}")
        self.handle = handle
        self.xi, self.tau = xi, tau
        self.W = quad.domain_halfwidth
        self.scale = np.sqrt(2.0 * coeffs.lambda1)
        self.r = np.linspace(0.0, np.sqrt(span), quad.lattice_levels + 1)
        self.z = np.linspace(-self.W, self.W, quad.lattice_nodes)
        self.depth = handle.depth_for(span)
        self.tail = levi_tail_bound(handle, self.depth, span)

        R, Zs = np.meshgrid(self.r[1:], self.z, indexing="ij")
        Y = xi + Zs * self.scale * R
        S = tau + R**2

        self.levels: list[np.ndarray] = []
        self.splines: list[RectBivariateSpline] = []
        vals = R**2 * _kernel_lz(coeffs, Y, S, xi, tau)
        ref = float(np.max(np.abs(vals)))
        for m in range(1, self.depth + 1):
            if m > 1:
                prev = self.splines[-1]
                vals = R**2 * _volume_potential(
                    coeffs, quad, _kernel_lz, Y, S, tau,
                    lambda y, s, sp=prev: self._iterate_density(sp, y, s), xi=xi,
                ).reshape(R.shape)
            peak = float(np.max(np.abs(vals)))
            if not np.isfinite(peak):
                raise NumericalError(f"Levi iterate {m} is not finite at source ({xi}, {tau})")
            if peak == 0.0 or (m > 1 and peak <= cfg.LEVI_NEGLIGIBLE * ref):
                break
            self.levels.append(vals)
            self.splines.append(_fit_levels(self.r, self.z, vals, ky=5))
            logger.debug("lattice (%.4g, %.4g): iterate %d peak %.3e", xi, tau, m, peak)
        self.n_built = len(self.levels)
        self._phi_splines: dict[int, RectBivariateSpline | None] = {}

    def _iterate_density(self, spline, y, sigma):
        r = np.sqrt(np.maximum(sigma - self.tau, 0.0))
        safe_r = np.where(r > 0, r, 1.0)
        z = (y - self.xi) / (self.scale * safe_r)
        inside = (np.abs(z) <= self.W) & (r > 0)
        zc = np.clip(z, -self.W, self.W)
        vals = spline.ev(r.ravel(), zc.ravel()).reshape(np.shape(r)) / safe_r**2
        return np.where(inside, vals, 0.0)

    def phi_spline(self, depth: int | None = None):
        depth = self.n_built if depth is None else min(depth, self.n_built)
        if depth not in self._phi_splines:
            if depth == 0:
                self._phi_splines[depth] = None
            else:
                total = sum((-1) ** m * self.levels[m - 1] for m in range(1, depth + 1))
                self._phi_splines[depth] = _fit_levels(self.r, self.z, total, ky=5)
        return self._phi_splines[depth]

    def phi(self, y, sigma, depth: int | None = None) -> np.ndarray:
        """Partial sum Σ_{m≤depth} (−1)^m (ℒZ)_m at (y, σ)."""
        spline = self.phi_spline(depth)
        if spline is None:
            return np.zeros(np.broadcast(np.asarray(y), np.asarray(sigma)).shape)
        return self._iterate_density(spline, *np.broadcast_arrays(np.asarray(y, float), np.asarray(sigma, float)))

    def iterate(self, m: int, x, t) -> np.ndarray:
        """(ℒZ)_m at targets; m ≥ 2 integrates the stored (m−1)-th iterate exactly at (x, t)."""
        coeffs = self.handle.coeffs
        if m == 1:
            return _kernel_lz(coeffs, x, t, self.xi, self.tau)
        if m - 1 > self.n_built:
            return np.zeros(np.shape(x))
        spline = self.splines[m - 2]
        return _volume_potential(
            coeffs, self.handle.quad, _kernel_lz, x, t, self.tau,
            lambda y, s: self._iterate_density(spline, y, s), xi=self.xi,
        )

    def correction(self, kernel, x, t, depth: int | None = None) -> np.ndarray:
        """∫∫ kernel(x,t,y,σ) φ(y,σ,ξ,τ) dy dσ."""
        spline = self.phi_spline(depth)
        if spline is None:
            return np.zeros(np.shape(x))
        return _volume_potential(
            self.handle.coeffs, self.handle.quad, kernel, x, t, self.tau,
            lambda y, s: self._iterate_density(spline, y, s), xi=self.xi,
        )


def _per_source(handle: KernelHandle, x, t, xi, tau, fn):
    x, t, xi, tau = _broadcast_checked(x, t, xi, tau)
    if np.any(t > handle.coeffs.horizon + 1e-12):
        raise DomainError(f"t exceeds the coefficient horizon {handle.coeffs.horizon}")
    shape = x.shape
    xf, tf, xif, tauf = (np.ravel(v) for v in (x, t, xi, tau))
    out = np.empty(xf.size)
    sources = np.unique(np.stack([xif, tauf], axis=1), axis=0)
    for s_xi, s_tau in sources:
        mask = (xif == s_xi) & (tauf == s_tau)
        lattice = handle.lattice(s_xi, s_tau)
        out[mask] = fn(lattice, xf[mask], tf[mask])
    return _scalar(out.reshape(shape))


# ---------------------------------------------------------------------------
# Public pointwise operations
# ---------------------------------------------------------------------------
def levi_iterate_m(handle: KernelHandle, m: int, x, t, xi, tau):
    """
    m-th Levi iterate (ℒZ)_m(x,t,ξ,τ).

    Raises DomainError for m < 1 or m > levi_depth.
    """
    if m < 1 or m > handle.levi_depth:
        raise DomainError(f"iterate index {m} outside [1, {handle.levi_depth}]")
    return _per_source(handle, x, t, xi, tau, lambda lat, xs, ts: lat.iterate(m, xs, ts))


def levi_series_log_term(handle: KernelHandle, k, dt: float) -> np.ndarray:
    """log of K^k (π/C)^{(k−1)/2} Γ(α/2)^k / Γ(kα/2) · dt^{(kα−3+α_floor)/2}."""
    K, C = handle.tail_constants
    alpha = handle.coeffs.holder_alpha
    k = np.asarray(k, dtype=float)
    return (
        k * np.log(K)
        + (k - 1.0) / 2.0 * np.log(np.pi / C)
        + k * gammaln(alpha / 2.0)
        - gammaln(k * alpha / 2.0)
        + (k * alpha - 3.0 + handle.alpha_floor) / 2.0 * np.log(dt)
    )


def levi_tail_bound(handle: KernelHandle, m: int, dt: float) -> float:
    """
    A-priori majorant of Σ_{k>m} |(ℒZ)_k| from the fitted (K, C).

    Terms are summed in log space until they have fallen far below the
    running maximum past the series peak.
    """
    K, _ = handle.tail_constants
    if K <= 0:
        return 0.0
    if dt <= 0:
        raise DomainError("tail bound needs dt > 0")
    block = cfg.LEVI_TAIL_TERMS
    start = m + 1
    chunks = []
    peak = -np.inf
    for _ in range(10_000):
        logs = levi_series_log_term(handle, np.arange(start, start + block), dt)
        chunks.append(logs)
        peak = max(peak, float(logs.max()))
        if logs[-1] < logs[0] and logs[-1] < peak - 80.0:
            break
        start += block
    return float(np.exp(logsumexp(np.concatenate(chunks))))


def eval_phi(handle: KernelHandle, x, t, xi, tau, depth: int | None = None):
    """
    Levi density φ as the alternating partial sum of the stored iterates.

    Returns
    -------
    (phi, tail) — values broadcast over the inputs and the tail bound at
    the depth used (evaluated at the largest t − τ requested)
    """
    values = _per_source(handle, x, t, xi, tau, lambda lat, xs, ts: lat.phi(xs, ts, depth))
    dt = float(np.max(np.asarray(t, dtype=float) - np.asarray(tau, dtype=float)))
    used = handle.depth_for(dt) if depth is None else depth
    return values, levi_tail_bound(handle, used, dt)


def eval_gamma(handle: KernelHandle, x, t, xi, tau):
    """
    Γ = Z + ∫∫ Z φ.

    Exactly Z when every Levi iterate vanishes (constant a, b = c = 0).
    """
    coeffs = handle.coeffs
    return _per_source(
        handle, x, t, xi, tau,
        lambda lat, xs, ts: _kernel_z(coeffs, xs, ts, lat.xi, lat.tau) + lat.correction(_kernel_z, xs, ts),
    )


def eval_gamma_dx(handle: KernelHandle, x, t, xi, tau):
    """∂ₓΓ = ∂ₓZ + ∫∫ ∂ₓZ φ."""
    coeffs = handle.coeffs
    return _per_source(
        handle, x, t, xi, tau,
        lambda lat, xs, ts: _kernel_zx(coeffs, xs, ts, lat.xi, lat.tau) + lat.correction(_kernel_zx, xs, ts),
    )


# ---------------------------------------------------------------------------
# Whole-lattice propagation
# ---------------------------------------------------------------------------
def _profile_fn(x_grid: np.ndarray, g: np.ndarray):
    """Cubic interpolant with constant extension beyond the grid."""
    g = np.asarray(g, dtype=float)
    if np.ptp(g) == 0.0:
        value = float(g[0])
        return lambda y: np.full(np.shape(y), value)
    spline = CubicSpline(x_grid, g)
    lo, hi = x_grid[0], x_grid[-1]
    return lambda y: spline(np.clip(y, lo, hi))


def _source_fn(x_grid: np.ndarray, times: np.ndarray, values: np.ndarray):
    """Linear in time, cubic in space, constant extension outside the lattice."""
    values = np.asarray(values, dtype=float)
    if not np.any(values):
        return None
    spline = RectBivariateSpline(times, x_grid, values, kx=1, ky=3, s=0)
    t_lo, t_hi = times[0], times[-1]
    x_lo, x_hi = x_grid[0], x_grid[-1]

    def fn(y, s):
        y, s = np.broadcast_arrays(y, s)
        out = spline.ev(np.clip(s, t_lo, t_hi).ravel(), np.clip(y, x_lo, x_hi).ravel())
        return out.reshape(y.shape)

    return fn


def propagate(
    handle: KernelHandle,
    x_grid,
    g,
    tau: float,
    times,
    source=None,
    source_times=None,
) -> np.ndarray:
    """
    u(x, t) = ∫Γ(x,t,ξ,τ) g(ξ) dξ + ∫_τ^t ∫Γ(x,t,ξ,s) F(ξ,s) dξ ds on x_grid × times.

    The Levi series is carried on the profile itself: Ψ_1 = ℒZ∘g + ℒZ⋆F,
    Ψ_{m+1} = ℒZ⋆Ψ_m, and u = Z∘g + Z⋆F + Z⋆Σ(−1)^m Ψ_m (order of
    integration exchanged relative to the pointwise representation).

    Parameters
    ----------
    handle       : KernelHandle
    x_grid       : (nx,) spatial nodes; g and F are constant-extended beyond them
    g            : (nx,) profile at time tau
    tau          : float — start time
    times        : (n,) evaluation times, all > tau and ≤ horizon
    source       : (ns, nx) source F sampled at source_times, or None
    source_times : (ns,) increasing times covering [tau, max(times)]

    Returns
    -------
    ndarray (n, nx)
    """
    coeffs, quad = handle.coeffs, handle.quad
    x_grid = np.asarray(x_grid, dtype=float)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times <= tau):
        raise DomainError("propagate requires every evaluation time > tau")
    if np.max(times) > coeffs.horizon + 1e-12:
        raise DomainError(f"evaluation time beyond the coefficient horizon {coeffs.horizon}")
    g_fn = _profile_fn(x_grid, g)
    f_fn = None
    if source is not None:
        f_fn = _source_fn(x_grid, np.asarray(source_times, dtype=float), source)

    span = float(np.max(times)) - tau
    r = np.linspace(0.0, np.sqrt(span), quad.lattice_levels + 1)
    R, X = np.meshgrid(r[1:], x_grid, indexing="ij")
    S = tau + R**2
    depth = handle.depth_for(span)

    psi = _initial_potential(coeffs, quad, _kernel_lz, X, S, tau, g_fn)
    if f_fn is not None:
        psi = psi + _volume_potential(coeffs, quad, _kernel_lz, X, S, tau, f_fn)
    vals = R * psi.reshape(R.shape)
    ref = float(np.max(np.abs(vals)))
    combined = np.zeros_like(vals)
    built = 0
    spline = None
    for m in range(1, depth + 1):
        if m > 1:
            vals = R * _volume_potential(
                coeffs, quad, _kernel_lz, X, S, tau,
                lambda y, s, sp=spline: _applied_density(sp, x_grid, tau, y, s),
            ).reshape(R.shape)
        peak = float(np.max(np.abs(vals)))
        if not np.isfinite(peak):
            raise NumericalError(f"propagated Levi iterate {m} is not finite")
        if peak == 0.0 or (m > 1 and peak <= cfg.LEVI_NEGLIGIBLE * ref):
            break
        combined += (-1) ** m * vals
        spline = _fit_levels(r, x_grid, vals, ky=3)
        built = m
    logger.debug("propagate: %d Levi levels over span %.4g", built, span)

    T, XX = np.meshgrid(times, x_grid, indexing="ij")
    u = _initial_potential(coeffs, quad, _kernel_z, XX, T, tau, g_fn)
    if f_fn is not None:
        u = u + _volume_potential(coeffs, quad, _kernel_z, XX, T, tau, f_fn)
    if built:
        phi_spline = _fit_levels(r, x_grid, combined, ky=3)
        u = u + _volume_potential(
            coeffs, quad, _kernel_z, XX, T, tau,
            lambda y, s: _applied_density(phi_spline, x_grid, tau, y, s),
        )
    u = u.reshape(T.shape)
    if not np.all(np.isfinite(u)):
        raise NumericalError("propagated field is not finite")
    return u


def _applied_density(spline, x_grid, tau, y, sigma):
    r = np.sqrt(np.maximum(sigma - tau, 0.0))
    safe_r = np.where(r > 0, r, 1.0)
    yc = np.clip(y, x_grid[0], x_grid[-1])
    vals = spline.ev(r.ravel(), yc.ravel()).reshape(np.shape(r)) / safe_r
    return np.where(r > 0, vals, 0.0)


def apply_gamma(handle: KernelHandle, x_grid, g, t: float, tau: float) -> np.ndarray:
    """x ↦ ∫Γ(x,t,ξ,τ) g(ξ) dξ on x_grid."""
    if t <= tau:
        raise DomainError("apply_gamma requires t > tau")
    return propagate(handle, x_grid, g, tau, [t])[0]


# ---------------------------------------------------------------------------
# Fitted constants, sensitivity and diagnostics
# ---------------------------------------------------------------------------
def fit_tail_constants(coeffs: ParabolicCoefficients) -> tuple[float, float]:
    """
    Fit |ℒZ| ≤ K (t−τ)^{−(3−α)/2} exp(−C(x−ξ)²/(t−τ)) on a sample lattice.

    log|ℒZ|·(t−τ)^{(3−α)/2} is regressed on q = (x−ξ)²/(t−τ) for the slope
    −C; K is the smallest envelope over the samples, inflated by
    TAIL_K_INFLATION. These constants are diagnostics, not certified bounds.
    """
    alpha = coeffs.holder_alpha
    lo, hi = coeffs.domain
    sources = lo + (hi - lo) * np.array([0.25, 0.5, 0.75])
    dts = coeffs.horizon * np.geomspace(*cfg.TAILFIT_DT_RANGE, cfg.TAILFIT_N_DT)
    offs = np.linspace(-cfg.TAILFIT_Q_MAX, cfg.TAILFIT_Q_MAX, cfg.TAILFIT_N_X)
    XI, DT, O = np.meshgrid(sources, dts, offs, indexing="ij")
    D = O * np.sqrt(2.0 * coeffs.lambda1 * DT)
    vals = np.abs(_kernel_lz(coeffs, XI + D, DT, XI, 0.0)) * DT ** ((3.0 - alpha) / 2.0)
    q = (D**2 / DT).ravel()
    vals = vals.ravel()
    default_c = 1.0 / (4.0 * coeffs.lambda1)
    if not np.any(vals > 0):
        return 0.0, default_c
    keep = vals > 1e-8 * vals.max()
    if keep.sum() >= 3 and np.ptp(q[keep]) > 0:
        fit = stats.linregress(q[keep], np.log(vals[keep]))
        C = float(np.clip(-fit.slope, 1e-3 * default_c, 1.0 / (4.0 * coeffs.lambda0)))
    else:
        C = default_c
    logK = float(np.max(np.log(vals[keep]) + C * q[keep]))
    return cfg.TAIL_K_INFLATION * float(np.exp(logK)), C


def propagation_constant(coeffs: ParabolicCoefficients, tail_constants: tuple | None = None) -> float:
    """
    Growth factor K with ‖∫Γ(·,t,ξ,0) g(ξ)dξ‖_{C^{1,1/2}} ≲ K‖g‖_1 on [0, horizon].

    K = mass·(1 + √(4λ₁/π) + sup|b|·√T), where
    mass = 1 + K_tail·√(π/C)·(2/α)·T^{α/2} bounds ∫|Γ|dξ through the
    fitted Levi tail constants. Like those constants it is a diagnostic
    estimate, not a certified bound.
    """
    K_tail, C = fit_tail_constants(coeffs) if tail_constants is None else tail_constants
    T, alpha = coeffs.horizon, coeffs.holder_alpha
    mass = 1.0
    if K_tail > 0:
        mass += K_tail * np.sqrt(np.pi / C) * (2.0 / alpha) * T ** (alpha / 2.0)
    xs, ts = coeffs.sample_grid()
    X, S = np.meshgrid(xs, ts)
    b_sup = float(np.max(np.abs(coeffs.b(X, S))))
    return float(mass * (1.0 + np.sqrt(4.0 * coeffs.lambda1 / np.pi) + b_sup * np.sqrt(T)))


def coefficient_gap(handle_v: KernelHandle, handle_vbar: KernelHandle, samples) -> dict:
    """
    sup over samples of |Γ_v − Γ_v̄|·(t−τ)^{1/2}·exp(C(x−ξ)²/(t−τ)).

    Parameters
    ----------
    samples : (n, 4) array or DataFrame with columns x, t, xi, tau

    Returns
    -------
    dict: sup_gap, location (x, t, xi, tau), C
    """
    if handle_v.coeffs.horizon != handle_vbar.coeffs.horizon or handle_v.quad != handle_vbar.quad:
        raise KernelMismatchError("handles differ in horizon or quadrature policy")
    if handle_v.coeffs.holder_alpha != handle_vbar.coeffs.holder_alpha:
        raise KernelMismatchError("handles differ in Hölder class")
    pts = samples[["x", "t", "xi", "tau"]].to_numpy() if isinstance(samples, pd.DataFrame) else np.asarray(samples)
    x, t, xi, tau = (pts[:, k] for k in range(4))
    C = min(handle_v.tail_constants[1], handle_vbar.tail_constants[1])
    diff = np.abs(eval_gamma(handle_v, x, t, xi, tau) - eval_gamma(handle_vbar, x, t, xi, tau))
    weighted = diff * np.sqrt(t - tau) * np.exp(C * (x - xi) ** 2 / (t - tau))
    k = int(np.argmax(weighted))
    return {"sup_gap": float(weighted[k]), "location": tuple(float(v) for v in pts[k]), "C": C}


def pde_residual(handle: KernelHandle, x, t, xi: float, tau: float, h: float) -> np.ndarray:
    """
    Central-difference residual Γ_t − aΓ_xx + bΓ_x + cΓ with step h in x and t.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t - h <= tau):
        raise DomainError("residual stencil reaches t <= tau")
    coeffs = handle.coeffs
    xs = np.concatenate([x, x - h, x + h, x, x])
    ts = np.concatenate([t, t, t, t - h, t + h])
    G = np.asarray(eval_gamma(handle, xs, ts, xi, tau)).reshape(5, -1)
    g0, gm, gp, gb, gf = G
    gt = (gf - gb) / (2.0 * h)
    gx = (gp - gm) / (2.0 * h)
    gxx = (gp - 2.0 * g0 + gm) / h**2
    return gt - coeffs.a(x, t) * gxx + coeffs.b(x, t) * gx + coeffs.c(x, t) * g0


def semigroup_gap(handle: KernelHandle, x_grid, t: float, s: float, xi: float, tau: float) -> float:
    """
    Relative sup gap between ∫Γ(x,t,y,s)Γ(y,s,ξ,τ)dy and Γ(x,t,ξ,τ) on x_grid.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    mid = np.asarray(eval_gamma(handle, x_grid, s, xi, tau))
    lhs = apply_gamma(handle, x_grid, mid, t, s)
    rhs = np.asarray(eval_gamma(handle, x_grid, t, xi, tau))
    return float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))


def sample_table(handle: KernelHandle, samples) -> pd.DataFrame:
    """Debug dump: columns x, t, xi, tau, gamma, gamma_dx."""
    pts = samples[["x", "t", "xi", "tau"]].to_numpy() if isinstance(samples, pd.DataFrame) else np.asarray(samples)
    x, t, xi, tau = (pts[:, k] for k in range(4))
    return pd.DataFrame({
        "x":        x,
        "t":        t,
        "xi":       xi,
        "tau":      tau,
        "gamma":    np.atleast_1d(eval_gamma(handle, x, t, xi, tau)),
        "gamma_dx": np.atleast_1d(eval_gamma_dx(handle, x, t, xi, tau)),
    })


# ---------------------------------------------------------------------------
# Standalone smoke test
# ---------------------------------------------------------------------------
if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    heat = KernelHandle(ParabolicCoefficients.constant(1.0, horizon=1.0))
    x = np.linspace(-2, 2, 5)
    print("Heat kernel, Γ − Z:", np.max(np.abs(eval_gamma(heat, x, 0.5, 0.0, 0.0) - eval_Z(heat.coeffs, x, 0.5, 0.0, 0.0))))

    b = 1.5
    drift = KernelHandle(ParabolicCoefficients.constant(1.0, b=b, horizon=0.3))
    dt = 0.2
    exact = np.exp(-(x - b * dt) ** 2 / (4 * dt)) / np.sqrt(4 * np.pi * dt)
    approx = eval_gamma(drift, x, dt, 0.0, 0.0)
    print(f"Advection kernel, max error: {np.max(np.abs(approx - exact)):.3e}")
    print(f"Tail constants (diagnostic): K={drift.tail_constants[0]:.3f} C={drift.tail_constants[1]:.3f}")
    print("\n[kernel.py] OK")
