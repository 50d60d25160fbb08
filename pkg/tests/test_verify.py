"""Verification checks: passing trajectories and injected faults."""

import numpy as np
import pytest

import config as cfg
from data.grid import GridSpec
from data.scenario import load_scenario
from models.combustion import InitialData, UpperSolution, upper_solution
from models.solver import continue_global, picard_solve
from models.verify import (
    SELFTESTS,
    CheckReport,
    check_comparison,
    check_fuel,
    check_gradient_bound,
    check_lp_envelope,
    check_quadrant,
    check_sector,
    check_solution_stability,
    check_time_continuity,
    checks_table,
    corrupt_state,
    gradient_trace,
    kernel_selftest,
    render_summary,
    run_checks,
)
from tests.conftest import make_state

X = np.linspace(-8.0, 8.0, 33)
T = np.linspace(0.0, 1.0, 11)
GRID = GridSpec(half_width=8.0, nx=33, T=0.25, nt=4)
ENV = UpperSolution(M=1.0, alpha=0.5, beta=0.4)
FULL_FUEL = InitialData.from_profiles(X, *(np.ones_like(X),) * 4)


@pytest.fixture(scope="module")
def default_march():
    """The default scenario marched to its horizon (three windows)."""
    scenario = load_scenario(cfg.DEFAULT_SCENARIO)
    state, report = continue_global(scenario.data, scenario.params, scenario.grid, scenario.picard,
                                    horizon=scenario.horizon, quad=scenario.quad, levi_depth=scenario.levi_depth)
    return scenario, state, report


@pytest.fixture
def bump_state():
    """Gaussian bumps frozen in time with uniform fuel."""
    return make_state(X, T, np.exp(-X**2)[None, :] * np.ones((T.size, 1)))


def _consistent(report: CheckReport):
    assert report.passed == (report.worst_violation <= report.tolerance)


def test_sector_passes_and_fails(bump_state):
    ok = check_sector(bump_state, ENV)
    assert ok.passed and ok.worst_violation == 0.0
    bad = check_sector(corrupt_state(bump_state), ENV)
    assert not bad.passed
    assert bad.worst_violation == pytest.approx(1.0)
    assert bad.location == ("u1", 1.0, 0.0)
    _consistent(ok)
    _consistent(bad)


def test_sector_upper_breach(bump_state):
    hot = corrupt_state(bump_state, "u2", node=(5, 3), value=10.0)
    report = check_sector(hot, ENV)
    assert not report.passed
    assert report.location[0] == "u2"
    assert report.location[1] == pytest.approx(0.5)


def test_fuel_passes_and_fails(bump_state):
    data = FULL_FUEL
    assert check_fuel(bump_state, data).passed
    rising = np.ones((T.size, X.size))
    rising[6:, 10] = 1.0 + 1e-3
    bad = check_fuel(bump_state.with_fields(y1=rising), data)
    assert not bad.passed
    assert bad.location[0] == "y1"
    assert bad.location[1:] == pytest.approx((0.6, X[10]))
    negative = corrupt_state(bump_state, "y2", node=(3, 0), value=-0.5)
    assert not check_fuel(negative, data).passed


def test_quadrant(bump_state):
    assert check_quadrant(bump_state).passed
    bad = check_quadrant(corrupt_state(bump_state, value=-1e-6))
    assert not bad.passed and bad.worst_violation == pytest.approx(1e-6)


def test_lp_envelope_passes_for_a_frozen_state(bump_state, params):
    for p in (2.0, 4.0):
        report = check_lp_envelope(bump_state, GRID, params, p=p)
        assert report.passed
        assert report.name == f"lp_envelope_p{p:g}"


def test_lp_envelope_fails_on_runaway_growth(bump_state, params):
    # sup stays at 1 while the support spreads, so the L2 norm doubles in one step
    width = np.where(T > 0, 4.0, 1.0)[:, None]
    spread = np.exp(-(X[None, :] / width) ** 2)
    report = check_lp_envelope(bump_state.with_fields(u1=spread, u2=spread), GRID, params)
    assert not report.passed
    _consistent(report)


def test_lp_envelope_of_zero_state(params):
    report = check_lp_envelope(make_state(X, T, 0.0), GRID, params)
    assert report.passed and report.worst_violation == 0.0


def test_gradient_bound(bump_state):
    trace = gradient_trace(bump_state)
    assert list(trace.columns) == ["t", "sup_dx_u1", "edge_u1", "sup_u1", "sup_dx_u2", "edge_u2", "sup_u2"]
    assert check_gradient_bound(bump_state, GRID).passed


def test_gradient_growth_detected(bump_state):
    steep = np.array(bump_state.u1)
    steep[8:] = 3.0 * np.exp(-(X / 0.3) ** 2)
    report = check_gradient_bound(bump_state.with_fields(u1=steep), GRID)
    assert not report.passed
    assert report.notes["sup_dx_final"] > cfg.GRADIENT_GROWTH * report.notes["sup_dx_first"]


def test_gradient_edge_values_detected(bump_state):
    report = check_gradient_bound(corrupt_state(bump_state, node=(4, 0), value=0.5), GRID)
    assert not report.passed
    assert report.notes["edge_max"] == pytest.approx(0.5)


def test_time_continuity(bump_state):
    assert check_time_continuity(bump_state).passed
    nan = corrupt_state(bump_state, value=np.nan)
    report = check_time_continuity(nan)
    assert not report.passed and report.worst_violation == float("inf")
    jump = corrupt_state(bump_state, value=1e6)
    assert not check_time_continuity(jump).passed


def test_corrupt_state_leaves_the_original_untouched(bump_state):
    corrupted = corrupt_state(bump_state)
    assert bump_state.u1[-1, X.size // 2] == 1.0
    assert corrupted.u1[-1, X.size // 2] == -1.0


def test_comparison_without_perturbation(default_data, params, small_grid, cheap_quad):
    report = check_comparison(default_data, params, small_grid, delta=0.0, quad=cheap_quad)
    assert report.passed and report.worst_violation == 0.0


@pytest.mark.slow
def test_comparison_ordering_and_linearity(default_data, params, small_grid, cheap_quad):
    report = check_comparison(default_data, params, small_grid, delta=1e-3, quad=cheap_quad)
    assert report.passed
    assert 1.6 <= report.notes["ratio"] <= 2.4
    assert report.notes["gap"] <= report.notes["gronwall_bound"]


@pytest.mark.slow
def test_comparison_fault_on_impossible_ratio(default_data, params, small_grid, cheap_quad):
    report = check_comparison(default_data, params, small_grid, delta=1e-3, quad=cheap_quad, ratio_range=(3.0, 4.0))
    assert not report.passed
    _consistent(report)


def test_stability_without_perturbation(default_data, params, small_grid, cheap_quad):
    report = check_solution_stability(default_data, params, small_grid, eps_values=(0.0,), quad=cheap_quad)
    assert report.passed


@pytest.mark.slow
def test_stability_gap_shrinks_with_the_perturbation(default_data, params, small_grid, cheap_quad):
    report = check_solution_stability(default_data, params, small_grid, quad=cheap_quad)
    assert report.passed
    fault = check_solution_stability(default_data, params, small_grid, quad=cheap_quad, decay=0.1)
    assert not fault.passed


def test_kernel_selftest_exactness():
    (report,) = kernel_selftest(names=("exactness",))
    assert report.name == "exactness"
    assert report.passed
    assert report.worst_violation <= cfg.SELFTEST_EXACT_TOL


@pytest.mark.slow
def test_kernel_selftest_delta_family():
    (report,) = kernel_selftest(names=("delta_family",))
    assert report.passed
    errors = [report.notes[f"err@{dt:g}"] for dt in cfg.SELFTEST_DELTA_DT]
    assert errors == sorted(errors, reverse=True)


def test_run_checks_keeps_task_order(bump_state):
    tasks = {
        "sector":   lambda: check_sector(bump_state, ENV),
        "quadrant": lambda: check_quadrant(bump_state),
        "fuel":     lambda: check_fuel(corrupt_state(bump_state, "y1", value=2.0), FULL_FUEL),
    }
    reports = run_checks(tasks)
    assert [r.name for r in reports] == ["sector", "quadrant", "fuel"]
    assert [r.passed for r in reports] == [True, True, False]


def test_checks_table_and_summary(bump_state):
    reports = [check_sector(bump_state, ENV), check_quadrant(corrupt_state(bump_state))]
    table = checks_table(reports)
    assert list(table.columns) == ["check", "passed", "worst_violation", "location", "tolerance", "notes"]
    assert table["passed"].tolist() == [True, False]
    summary = render_summary(reports)
    assert "[FAIL] quadrant" in summary
    assert "1/2 checks passed" in summary


def test_verify_default_window(default_data, params, small_grid, cheap_quad):
    state, _ = picard_solve(default_data, params, small_grid, quad=cheap_quad)
    env = upper_solution(default_data, params)
    for report in (check_sector(state, env, tol=1e-6), check_fuel(state, default_data),
                   check_time_continuity(state)):
        assert report.passed, report


@pytest.mark.slow
def test_kernel_selftest_full_battery():
    reports = kernel_selftest()
    assert [r.name for r in reports] == list(SELFTESTS)
    failed = [r for r in reports if not r.passed]
    assert not failed, render_summary(failed)
    by_name = {r.name: r for r in reports}
    assert by_name["advection"].worst_violation <= cfg.SELFTEST_ADVECTION_TOL
    assert by_name["mass"].worst_violation <= cfg.SELFTEST_MASS_TOL
    assert by_name["semigroup"].worst_violation <= cfg.SELFTEST_SEMIGROUP_TOL


@pytest.mark.slow
def test_default_march_stays_in_the_sector(default_march):
    scenario, state, report = default_march
    assert len(report.windows) == 3
    assert report.shrink_history == []
    assert state.t[-1] == pytest.approx(cfg.HORIZON)
    env = upper_solution(scenario.data, scenario.params)
    for check in (check_sector(state, env, cfg.CHECK_TOL), check_fuel(state, scenario.data, cfg.CHECK_TOL),
                  check_quadrant(state, cfg.CHECK_TOL)):
        assert check.passed, check
    assert (report.table["clip_min"] >= -cfg.CHECK_TOL).all()


@pytest.mark.slow
def test_default_march_lp_envelope_and_gradient(default_march):
    scenario, state, _ = default_march
    for p in cfg.LP_P_VALUES:
        report = check_lp_envelope(state, scenario.grid, scenario.params, cfg.CHECK_TOL, p)
        assert report.name == f"lp_envelope_p{p:g}"
        assert report.passed, report
    gradient = check_gradient_bound(state, scenario.grid)
    assert gradient.passed, gradient
    assert gradient.notes["sup_dx_final"] <= cfg.GRADIENT_GROWTH * gradient.notes["sup_dx_first"]
    assert gradient.notes["edge_max"] <= cfg.EDGE_FRACTION * gradient.notes["interior_max"]
