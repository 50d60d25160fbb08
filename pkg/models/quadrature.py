"""
models/quadrature.py — Composite Gauss–Legendre Rules
=====================================================
Quadrature building blocks for the kernel integrals:

  - composite Gauss–Legendre panels on [0, 1], mapped onto arbitrary
    (possibly empty) intervals, vectorised over many targets;
  - time nodes on (τ, t) with the power substitution σ = τ + h·u^p at the
    lower end and σ = t − h·u^p at the upper end, which removes the
    (σ−τ)^{-1/2} and (t−σ)^{-1/2} endpoint singularities of heat-kernel
    volume potentials.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def gauss_legendre_unit(n_nodes: int, n_panels: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """
    Composite Gauss–Legendre rule on [0, 1].

    Parameters
    ----------
    n_nodes  : int — total node budget (rounded up to a multiple of n_panels)
    n_panels : int — equal-width panels

    Returns
    -------
    (nodes, weights) — 1-D read-only arrays, weights summing to 1
    """
    n_panels = max(1, int(n_panels))
    per_panel = max(1, -(-int(n_nodes) // n_panels))
    g, w = np.polynomial.legendre.leggauss(per_panel)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] * (g[None, :] + 1.0) / 2.0).ravel()
    weights = (h[:, None] * w[None, :] / 2.0).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def interval_nodes(lo, hi, n_nodes: int, n_panels: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """
    Map the unit rule onto [lo, hi] elementwise.

    Empty intervals (hi <= lo) get zero weights, so they contribute nothing.

    Returns
    -------
    (y, w) with shape lo.shape + (n,)
    """
    u, wu = gauss_legendre_unit(n_nodes, n_panels)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    span = np.maximum(hi - lo, 0.0)
    y = lo[..., None] + span[..., None] * u
    w = span[..., None] * wu
    return y, w


def singular_time_nodes(
    t,
    tau: float,
    n_time: int,
    n_panels: int = 1,
    exponent: float = 2.0,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Nodes and weights for ∫_τ^t g(σ) dσ with inverse-square-root endpoint behaviour.

    The interval is split at its midpoint; each half carries n_time//2 nodes.

    Parameters
    ----------
    t        : (P,) upper limits, all > tau
    tau      : float — common lower limit
    n_time   : int — total node count
    n_panels : int — panels per half
    exponent : float — power p of the substitution (p = 2 gives σ = τ + r²)

    Returns
    -------
    (sigma, w) with shape (P, 2·(n_time//2))
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    half_nodes = max(2, int(n_time) // 2)
    u, wu = gauss_legendre_unit(half_nodes, n_panels)
    half = (t - tau) / 2.0
    jac = half[:, None] * exponent * u ** (exponent - 1.0) * wu
    step = half[:, None] * u**exponent
    sigma = np.concatenate([tau + step, t[:, None] - step], axis=1)
    w = np.concatenate([jac, jac], axis=1)
    return sigma, w
