"""Constitutive functions, fuel solution and upper-solution envelope."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import config as cfg
from models.combustion import (
    InitialData,
    ModelParams,
    UpperSolution,
    alpha_coeff,
    arrhenius_deriv_max,
    arrhenius_tilde,
    arrhenius_tilde_deriv,
    beta_coeff,
    fuel_from_history,
    lp_invariant_window,
    model_summary_table,
    phi_upper,
    reaction_f,
    reaction_lipschitz,
    upper_solution,
    upper_solution_residual,
)
from models.errors import ConfigurationError, DomainError

PARAMS = ModelParams.synthetic()
LIP_U_MAX = 2.0
layers = st.sampled_from((1, 2))
temperatures = st.floats(min_value=0.0, max_value=LIP_U_MAX, allow_nan=False, allow_infinity=False)
fuels = st.floats(min_value=0.0, max_value=1.0, allow_nan=False, allow_infinity=False)


def test_arrhenius_values():
    assert arrhenius_tilde(1.0, 1.0) == pytest.approx(np.exp(-1.0), rel=1e-15)
    assert arrhenius_tilde(0.0, 1.0) == 0.0
    assert arrhenius_tilde(-3.0, 1.0) == 0.0
    s = np.array([-1.0, 0.0, 1e-6, 0.5, 2.0])
    out = arrhenius_tilde(s, 1.0)
    assert np.all((out >= 0) & (out < 1))
    assert np.all(np.diff(out) >= 0)


def test_arrhenius_derivative_maximum():
    E = 1.7
    s = np.linspace(1e-3, 10.0, 200_001)
    dense = arrhenius_tilde_deriv(s, E)
    assert dense.max() == pytest.approx(arrhenius_deriv_max(E), rel=1e-6)
    assert s[np.argmax(dense)] == pytest.approx(E / 2.0, abs=1e-3)
    assert arrhenius_tilde_deriv(1e-4, E) == pytest.approx(0.0, abs=1e-300)


def test_coefficients_at_zero_fuel(params):
    assert alpha_coeff(1, 0.0, params) == pytest.approx(params.lambda_1 / params.a_1)
    assert beta_coeff(2, 0.0, params) == pytest.approx(params.c_2 / params.a_2)
    y = np.array([0.0, 1.0, 2.0])
    alpha = alpha_coeff(1, y, params)
    assert np.all(np.diff(alpha) < 0)


def test_negative_fuel_rejected(params):
    with pytest.raises(DomainError):
        alpha_coeff(1, -0.1, params)
    with pytest.raises(DomainError):
        reaction_f(2, np.array([0.1, -1e-3]), 1.0, 1.0, params)


def test_reaction_with_equal_temperatures_is_burn_only(params):
    y, u = 0.7, 1.3
    k = params.layer(1)
    expected = (k["b"] * k["A"] * u + k["d"]) / (k["a"] + k["b"] * y) * y * np.exp(-params.E / u)
    assert reaction_f(1, y, u, u, params) == pytest.approx(expected, rel=1e-14)


@given(
    i=layers,
    u=arrays(np.float64, 16, elements=temperatures),
    y=arrays(np.float64, 16, elements=fuels),
)
@settings(max_examples=100, deadline=None)
def test_reaction_nonnegative_in_the_quadrant(i, u, y):
    assert np.all(reaction_f(i, y, u, u, PARAMS) >= 0.0)


def test_coupling_has_opposite_signs(params):
    r1 = reaction_f(1, 0.0, 1.0, 0.0, params)
    r2 = reaction_f(2, 0.0, 1.0, 0.0, params)
    assert r1 == pytest.approx(-params.q / params.a_1)
    assert r2 == pytest.approx(params.q / params.a_2)


def test_fuel_from_history():
    assert fuel_from_history(1.0, 0.0, 2.0) == 1.0
    assert fuel_from_history(0.8, 0.5, 2.0) == pytest.approx(0.8 * np.exp(-1.0))
    assert fuel_from_history(0.0, 3.0, 2.0) == 0.0
    with pytest.raises(DomainError):
        fuel_from_history(1.0, -1e-3, 1.0)


def test_model_params_must_be_positive():
    with pytest.raises(ConfigurationError):
        ModelParams.synthetic(q=0.0)
    with pytest.raises(ConfigurationError):
        ModelParams.synthetic(unknown=1.0)
    with pytest.raises(DomainError):
        ModelParams.synthetic().layer(3)


def test_initial_data_rejects_negative_profiles():
    x = np.linspace(-1, 1, 5)
    with pytest.raises(DomainError):
        InitialData.from_profiles(x, -np.ones(5), np.ones(5), np.ones(5), np.ones(5))


def test_initial_data_lipschitz_bound_enforced():
    x = np.linspace(-1, 1, 5)
    prof = np.abs(x)
    with pytest.raises(ConfigurationError):
        InitialData(x, prof, prof, prof, prof, lip_bound=(0.5, 1.0, 1.0, 1.0))
    data = InitialData.from_profiles(x, prof, prof, prof, prof)
    assert data.lip_bound == pytest.approx((1.0, 1.0, 1.0, 1.0))
    assert data.lipschitz_norm(prof) == pytest.approx(2.0)


def test_upper_solution_constants(default_data, params):
    env = upper_solution(default_data, params)
    assert env.M == max(default_data.u0_1.max(), default_data.u0_2.max())
    assert env.alpha == pytest.approx(max(1.0 * 0.5 * 1.0 / 1.0, 0.8 * 0.4 * 1.0 / 1.2))
    assert env.beta == pytest.approx(max(0.2 / 0.5, 0.1 / 0.32))
    assert phi_upper(0.0, env) == pytest.approx(env.M)


def test_phi_upper_examples():
    env = UpperSolution(M=1.0, alpha=0.5, beta=0.4)
    assert phi_upper(2.0, env) == pytest.approx(1.4 * np.e - 0.4)
    flat = UpperSolution(M=2.0, alpha=0.0, beta=0.3)
    assert phi_upper(np.array([0.0, 5.0]), flat) == pytest.approx([2.0, 2.0])
    with pytest.raises(DomainError):
        phi_upper(-0.1, env)


def test_upper_solution_residual_nonnegative(default_data, params):
    env = upper_solution(default_data, params)
    t = np.linspace(0.0, 5.0, 101)
    assert np.min(upper_solution_residual(t, env, default_data, params)) >= -1e-12


@given(i=layers, u1=temperatures, u2=temperatures, y=fuels)
@settings(max_examples=200, deadline=None)
def test_reaction_lipschitz_dominates_finite_differences(i, u1, u2, y):
    bounds = reaction_lipschitz(PARAMS, LIP_U_MAX, (1.0, 1.0))
    h = 1e-6
    base = reaction_f(i, y, u1, u2, PARAMS)
    d1 = (reaction_f(i, y, u1 + h, u2, PARAMS) - base) / h
    d2 = (reaction_f(i, y, u1, u2 + h, PARAMS) - base) / h
    assert abs(d1) + abs(d2) <= bounds[i - 1] + 1e-5


def test_lp_invariant_window():
    assert lp_invariant_window(1.0, 2.0) == pytest.approx(0.125)
    assert lp_invariant_window(1.0, 0.0) == float("inf")


def test_model_summary_table(default_data, params):
    table = model_summary_table(params, default_data, cfg.HORIZON)
    assert list(table.index) == [1, 2]
    assert np.all(table["alpha_min"] <= table["alpha_max"])
    assert np.all(table["phi_horizon"] >= table["u0_sup"])


def test_error_hierarchy():
    from models import errors

    assert issubclass(errors.ConfigurationError, ValueError)
    assert issubclass(errors.CoefficientBoundsError, errors.DomainError)
    assert issubclass(errors.FdStabilityError, RuntimeError)
    exc = errors.LocalExistenceError("no window", [(0.25, "ball"), (0.125, "stalled")])
    assert isinstance(exc, errors.PorousFrontError)
    assert exc.shrink_history[-1] == (0.125, "stalled")
    assert errors.LocalExistenceError("bare").shrink_history == []
