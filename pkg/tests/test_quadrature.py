"""Composite Gauss–Legendre panels and singularity-substituted time nodes."""

import numpy as np
import pytest

from models.quadrature import gauss_legendre_unit, interval_nodes, singular_time_nodes


@pytest.mark.parametrize("n_nodes, n_panels", [(4, 1), (12, 3), (16, 2), (7, 2)])
def test_unit_rule_weights_and_polynomials(n_nodes, n_panels):
    nodes, weights = gauss_legendre_unit(n_nodes, n_panels)
    assert weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all((nodes > 0) & (nodes < 1))
    per_panel = -(-n_nodes // n_panels)
    for k in range(2 * per_panel):
        assert np.dot(weights, nodes**k) == pytest.approx(1.0 / (k + 1), rel=1e-12)


def test_unit_rule_is_read_only():
    nodes, _ = gauss_legendre_unit(8, 2)
    with pytest.raises(ValueError):
        nodes[0] = 0.0


def test_interval_nodes_vectorised_and_empty():
    lo = np.array([0.0, 1.0, 2.0])
    hi = np.array([1.0, 3.0, 2.0])
    y, w = interval_nodes(lo, hi, 8, 2)
    assert y.shape == w.shape == (3, 8)
    np.testing.assert_allclose(np.sum(w * y**2, axis=1), [1.0 / 3.0, 26.0 / 3.0, 0.0], rtol=1e-13)
    assert np.all(w[2] == 0.0)


def test_interval_nodes_backwards_interval_contributes_nothing():
    _, w = interval_nodes(1.0, 0.0, 6)
    assert np.all(w == 0.0)


@pytest.mark.parametrize("exponent, rtol", [(2.0, 1e-7), (4.0, 1e-4)])
def test_singular_time_nodes_integrate_inverse_square_roots(exponent, rtol):
    tau = 0.3
    t = np.array([0.35, 0.8, 1.3])
    sigma, w = singular_time_nodes(t, tau, 24, 2, exponent)
    assert sigma.shape == w.shape == (3, 24)
    assert np.all((sigma > tau) & (sigma < t[:, None]))
    np.testing.assert_allclose(w.sum(axis=1), t - tau, rtol=1e-13)
    lower = np.sum(w / np.sqrt(sigma - tau), axis=1)
    upper = np.sum(w / np.sqrt(t[:, None] - sigma), axis=1)
    exact = 2.0 * np.sqrt(t - tau)
    np.testing.assert_allclose(lower, exact, rtol=rtol)
    np.testing.assert_allclose(upper, exact, rtol=rtol)
