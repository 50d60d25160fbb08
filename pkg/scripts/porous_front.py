"""
scripts/porous_front.py — porous-front Command Line
===================================================
Entry point for every pipeline:

  porous-front kernel-selftest --scenario FILE [--out DIR] [--verbose]
  porous-front solve           --scenario FILE [--out DIR] [--verbose]
  porous-front compare         --scenario FILE [--out DIR] [--verbose]
  porous-front verify          --scenario FILE [--out DIR] [--verbose] [--inject-fault]

Exit codes: 0 success, 1 numerical or check failure, 2 configuration error.
PF_THREADS caps the worker threads used by the kernel.
"""

import argparse
import logging
import os
import sys

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg
from data.scenario import Scenario, load_scenario
from models.combustion import model_summary_table, upper_solution
from models.errors import ConfigurationError, LocalExistenceError, PorousFrontError
from models.fdref import fd_solve
from models.kernel import KernelHandle, QuadraturePolicy, sample_table
from models.solver import continue_global, norms_table, picard_solve
from models import verify
from scripts.outputs import write_table

logger = logging.getLogger("porous_front")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


def _meta(scenario: Scenario, command: str) -> dict:
    return {"command": command, "scenario": scenario.source, "name": scenario.name, "seed": scenario.seed}


def _solve(scenario: Scenario):
    return continue_global(
        scenario.data, scenario.params, scenario.grid, scenario.picard,
        horizon=scenario.horizon, quad=scenario.quad, levi_depth=scenario.levi_depth,
    )


def _write_solution(scenario: Scenario, out: str, command: str, verbose: bool):
    state, report = _solve(scenario)
    env = upper_solution(scenario.data, scenario.params)
    write_table(state.to_frame(), out, "trajectory.csv", _meta(scenario, command))
    write_table(norms_table(state, env, scenario.grid.p), out, "norms.csv", _meta(scenario, command))
    if verbose:
        iterations = pd.concat(
            [rep.to_frame().assign(window=k) for k, rep in enumerate(report.windows)], ignore_index=True
        )
        write_table(iterations, out, "picard_iterations.csv", _meta(scenario, command))
    print(report.table.to_string())
    return state, env


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------
def cmd_kernel_selftest(scenario: Scenario, out: str, verbose: bool = False) -> int:
    """Mass, delta-family, exactness, advection, residual and semigroup tests."""
    print("Running kernel self-test...")
    reports = verify.kernel_selftest(QuadraturePolicy(), scenario.levi_depth)
    write_table(verify.checks_table(reports), out, "kernel_selftest.csv", _meta(scenario, "kernel-selftest"))

    handle = KernelHandle(verify.smooth_variable_coefficients(), levi_depth=scenario.levi_depth)
    xs, ts = np.meshgrid(np.linspace(-2.0, 2.0, 9), np.array([0.05, 0.1, 0.25, 0.5]), indexing="ij")
    samples = pd.DataFrame({"x": xs.ravel(), "t": ts.ravel(), "xi": 0.0, "tau": 0.0})
    write_table(sample_table(handle, samples), out, "kernel_samples.csv",
                {**_meta(scenario, "kernel-selftest"), "tail_constants": handle.tail_constants,
                 "tail_constants_certified": False})
    print(verify.render_summary(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILURE


def cmd_solve(scenario: Scenario, out: str, verbose: bool = False) -> int:
    """Global march to the horizon; trajectory and norm trace."""
    print(f"Solving scenario {scenario.name!r} to horizon {scenario.horizon}...")
    print(model_summary_table(scenario.params, scenario.data, scenario.horizon).to_string())
    _write_solution(scenario, out, "solve", verbose)
    print(f"  Saved trajectory.csv and norms.csv to {out}")
    return EXIT_OK


def cmd_compare(scenario: Scenario, out: str, verbose: bool = False) -> int:
    """One Picard window against the finite-difference oracle on the same lattice."""
    print(f"Comparing Picard and finite-difference solutions for {scenario.name!r}...")
    state, report = picard_solve(scenario.data, scenario.params, scenario.grid, scenario.picard,
                                 scenario.quad, scenario.levi_depth)
    grid = scenario.grid.with_window(report.window_T)
    oracle = fd_solve(scenario.data, scenario.params, grid, scenario.fd)
    pic, ref = state.final(), oracle.final()
    profile = pd.DataFrame({
        "x":         state.x,
        "u1_picard": pic["u1"],
        "u1_fd":     ref["u1"],
        "u2_picard": pic["u2"],
        "u2_fd":     ref["u2"],
    })
    rows = []
    for i in (1, 2):
        scale = float(np.max(np.abs(ref[f"u{i}"])))
        gap = float(np.max(np.abs(pic[f"u{i}"] - ref[f"u{i}"])))
        rows.append({"field": f"u{i}", "T": report.window_T, "sup_gap": gap,
                     "rel_sup_gap": gap / scale if scale > 0 else gap})
    summary = pd.DataFrame(rows)
    write_table(profile, out, "compare.csv", _meta(scenario, "compare"))
    write_table(summary, out, "compare_summary.csv", _meta(scenario, "compare"))
    print(summary.to_string(index=False))
    worst = float(summary["rel_sup_gap"].max())
    if worst > cfg.COMPARE_REL_TOL:
        logger.error("relative sup gap %.3e exceeds %.1e", worst, cfg.COMPARE_REL_TOL)
        return EXIT_FAILURE
    return EXIT_OK


def _check_tasks(scenario: Scenario, state, env) -> dict:
    s = scenario
    tasks = {
        "sector":     lambda: [verify.check_sector(state, env, s.check_tol)],
        "fuel":       lambda: [verify.check_fuel(state, s.data, s.check_tol)],
        "quadrant":   lambda: [verify.check_quadrant(state, s.check_tol)],
        "comparison": lambda: [verify.check_comparison(s.data, s.params, s.grid, s.picard, s.delta,
                                                       s.check_tol, s.quad, s.levi_depth)],
        "lp_envelope": lambda: [verify.check_lp_envelope(state, s.grid, s.params, s.check_tol, p)
                                for p in s.p_values],
        "gradient":   lambda: [verify.check_gradient_bound(state, s.grid)],
        "continuity": lambda: [verify.check_time_continuity(state)],
        "stability":  lambda: [verify.check_solution_stability(s.data, s.params, s.grid, s.eps,
                                                               s.quad, s.levi_depth)],
    }
    return {name: tasks[name] for name in s.checks}


def cmd_verify(scenario: Scenario, out: str, verbose: bool = False, inject_fault: bool = False) -> int:
    """Solve, then run every requested check."""
    print(f"Verifying scenario {scenario.name!r}: {', '.join(scenario.checks)}")
    state, env = _write_solution(scenario, out, "verify", verbose)
    if inject_fault or scenario.inject_fault:
        logger.warning("fault injection: setting one node of u1 to -1 before the checks")
        state = verify.corrupt_state(state)
    nested = verify.run_checks(_check_tasks(scenario, state, env))
    reports = [r for group in nested for r in group]
    write_table(verify.checks_table(reports), out, "checks.csv", _meta(scenario, "verify"))
    print(verify.render_summary(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILURE


COMMANDS = {
    "kernel-selftest": cmd_kernel_selftest,
    "solve":           cmd_solve,
    "compare":         cmd_compare,
    "verify":          cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="porous-front",
        description="Two-layer porous-media combustion solver and verification harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        summary = fn.__doc__.strip().splitlines()[0] if fn.__doc__ else None
        p = sub.add_parser(name, help=summary)
        p.add_argument("--scenario", default=cfg.DEFAULT_SCENARIO, help="scenario TOML file")
        p.add_argument("--out", default=None, help="output directory (default: scenario output_dir)")
        p.add_argument("--verbose", action="store_true", help="DEBUG logging and per-iteration CSV")
        if name == "verify":
            p.add_argument("--inject-fault", action="store_true", help="corrupt one node before checking")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
    )
    try:
        scenario = load_scenario(args.scenario)
        out = args.out or scenario.output_dir
        kwargs = {"inject_fault": args.inject_fault} if args.command == "verify" else {}
        return COMMANDS[args.command](scenario, out, args.verbose, **kwargs)
    except ConfigurationError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except LocalExistenceError as exc:
        for T, reason in exc.shrink_history:
            logger.error("  window T=%.6g abandoned: %s", T, reason)
        logger.error("local solve failed: %s", exc)
        return EXIT_FAILURE
    except PorousFrontError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
