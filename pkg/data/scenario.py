"""
data/scenario.py — Scenario Files
=================================
A scenario is one TOML file describing a full run: model constants, initial
profiles, lattice, Picard and oracle settings, quadrature overrides and the
checks to execute. Anything omitted falls back to config.py.

  seed = 0
  horizon = 0.75
  levi_depth = 12
  output_dir = "results/default"

  [params]        lambda_1 = 1.0, ...
  [data.u1]       family = "gaussian-bump", center = 0.0, ...
  [grid]          half_width, nx, T, nt, p
  [picard]        tol_fixed_point, max_iters, window_shrink_factor, ball_radius
  [fd]            refine, theta, boundary
  [quadrature]    solver-grade QuadraturePolicy overrides
  [checks]        names, tol, delta, eps, p_values, inject_fault

Unknown sections or keys are configuration errors, not silently ignored.
"""

from __future__ import annotations

import logging
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg
from data.grid import GridSpec
from data.profiles import initial_data_from_specs
from models.combustion import InitialData, ModelParams
from models.errors import ConfigurationError
from models.fdref import FdConfig
from models.kernel import QuadraturePolicy
from models.solver import PicardConfig

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = {"name", "seed", "horizon", "levi_depth", "output_dir"}
SECTIONS = {"params", "data", "grid", "picard", "fd", "quadrature", "checks"}
CHECK_KEYS = {"names", "tol", "delta", "eps", "p_values", "inject_fault"}
FD_KEYS = {"refine", "theta", "boundary"}


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    params: ModelParams
    profiles: dict
    data: InitialData
    grid: GridSpec
    picard: PicardConfig
    fd: FdConfig
    quad: QuadraturePolicy
    checks: tuple = cfg.CHECK_NAMES
    horizon: float = cfg.HORIZON
    levi_depth: int = cfg.LEVI_DEPTH
    seed: int = cfg.RANDOM_SEED
    output_dir: str = cfg.DEFAULT_OUT_DIR
    check_tol: float = cfg.CHECK_TOL
    delta: float = cfg.COMPARISON_DELTA
    eps: tuple = cfg.STABILITY_EPS
    p_values: tuple = cfg.LP_P_VALUES
    inject_fault: bool = False
    source: str | None = field(default=None)


def _section(raw: dict, name: str, allowed: set | None = None) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigurationError(f"[{name}] must be a table")
    if allowed is not None:
        unknown = set(sec) - allowed
        if unknown:
            raise ConfigurationError(f"[{name}] has unknown key(s) {sorted(unknown)}")
    return sec


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{what} must be a number, got {value!r}")
    return float(value)


def _numbers(values, what: str) -> tuple:
    if not isinstance(values, (list, tuple)):
        raise ConfigurationError(f"{what} must be a list of numbers, got {values!r}")
    return tuple(_number(v, what) for v in values)


def _build(kind, section: str, **kwargs):
    try:
        return kind(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"[{section}]: {exc}") from exc


def scenario_from_dict(raw: dict, source: str | None = None) -> Scenario:
    """
    Validate a parsed TOML mapping and build every typed config object.

    Raises
    ------
    ConfigurationError for unknown keys/sections/checks/families, out-of-domain
    values, and any type invariant violated while building GridSpec,
    PicardConfig, FdConfig or QuadraturePolicy.
    """
    unknown = set(raw) - TOP_LEVEL_KEYS - SECTIONS
    if unknown:
        raise ConfigurationError(f"unknown top-level key(s) or section(s) {sorted(unknown)}")

    levi_depth = raw.get("levi_depth", cfg.LEVI_DEPTH)
    if isinstance(levi_depth, bool) or not isinstance(levi_depth, int) or levi_depth < 1:
        raise ConfigurationError(f"levi_depth must be an integer >= 1, got {levi_depth!r}")
    seed = raw.get("seed", cfg.RANDOM_SEED)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigurationError(f"seed must be an integer, got {seed!r}")
    horizon = _number(raw.get("horizon", cfg.HORIZON), "horizon")
    if not horizon > 0:
        raise ConfigurationError("horizon must be positive")

    params = _build(ModelParams.synthetic, "params", **_section(raw, "params", set(cfg.MODEL_PARAMS)))
    grid = _build(GridSpec, "grid", **_section(raw, "grid", {"half_width", "nx", "T", "nt", "p"}))

    data_sec = _section(raw, "data", {"u1", "u2", "y1", "y2"})
    profiles = {k: dict(cfg.DEFAULT_PROFILES[k]) for k in ("u1", "u2", "y1", "y2")}
    for key, spec in data_sec.items():
        if not isinstance(spec, dict):
            raise ConfigurationError(f"[data.{key}] must be a table")
        profiles[key] = dict(spec)
    data = initial_data_from_specs(grid.x(), profiles)

    picard_sec = dict(_section(raw, "picard", {"ball_radius", "tol_fixed_point", "max_iters", "window_shrink_factor"}))
    if "ball_radius" in picard_sec:
        picard_sec["ball_radius"] = _numbers(picard_sec["ball_radius"], "[picard] ball_radius")
    picard = _build(PicardConfig, "picard", seed=seed, **picard_sec)

    fd_sec = dict(_section(raw, "fd", FD_KEYS))
    refine = fd_sec.pop("refine", cfg.FD_REFINE)
    if isinstance(refine, bool) or not isinstance(refine, int) or refine < 1:
        raise ConfigurationError(f"[fd] refine must be a positive integer, got {refine!r}")
    fd = _build(FdConfig.for_grid, "fd", grid=grid, refine=refine, **fd_sec)

    quad_keys = set(QuadraturePolicy.__dataclass_fields__)
    quad = _build(QuadraturePolicy.solver_grade, "quadrature", **_section(raw, "quadrature", quad_keys))

    checks_sec = _section(raw, "checks", CHECK_KEYS)
    names = checks_sec.get("names", cfg.CHECK_NAMES)
    if not isinstance(names, (list, tuple)):
        raise ConfigurationError(f"[checks] names must be a list, got {names!r}")
    names = tuple(names)
    bad = [n for n in names if n not in cfg.CHECK_NAMES]
    if bad:
        raise ConfigurationError(f"unknown check name(s) {bad}; expected a subset of {cfg.CHECK_NAMES}")
    delta = _number(checks_sec.get("delta", cfg.COMPARISON_DELTA), "[checks] delta")
    eps = _numbers(checks_sec.get("eps", cfg.STABILITY_EPS), "[checks] eps")
    p_values = _numbers(checks_sec.get("p_values", cfg.LP_P_VALUES), "[checks] p_values")
    check_tol = _number(checks_sec.get("tol", cfg.CHECK_TOL), "[checks] tol")
    if delta < 0 or any(e < 0 for e in eps) or check_tol < 0:
        raise ConfigurationError("[checks] delta, eps and tol must be nonnegative")
    if any(p <= 1 for p in p_values):
        raise ConfigurationError("[checks] p_values must exceed 1")

    name = raw.get("name") or (os.path.splitext(os.path.basename(source))[0] if source else "scenario")
    output_dir = raw.get("output_dir", os.path.join(cfg.DEFAULT_OUT_DIR, name))
    if source and not os.path.isabs(output_dir):
        output_dir = os.path.join(cfg.BASE_DIR, output_dir)

    return Scenario(
        name=name, params=params, profiles=profiles, data=data, grid=grid,
        picard=picard, fd=fd, quad=quad, checks=names, horizon=horizon,
        levi_depth=levi_depth, seed=seed, output_dir=output_dir,
        check_tol=check_tol, delta=delta, eps=eps, p_values=p_values,
        inject_fault=bool(checks_sec.get("inject_fault", False)), source=source,
    )


def load_scenario(path: str = cfg.DEFAULT_SCENARIO) -> Scenario:
    """Read and validate a scenario TOML file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"scenario file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"scenario {path} is not valid TOML: {exc}") from exc
    scenario = scenario_from_dict(raw, source=path)
    logger.info("loaded scenario %s from %s", scenario.name, path)
    return scenario
