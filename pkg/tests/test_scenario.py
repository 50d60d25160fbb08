"""Scenario loading, profile families and lattice bookkeeping."""

import glob
import os

import numpy as np
import pytest

import config as cfg
from data.grid import GridSpec, SystemState
from data.profiles import build_profile, initial_data_from_specs
from data.scenario import load_scenario, scenario_from_dict
from models.errors import ConfigurationError
from tests.conftest import TINY_DEFAULT_TOML, make_state, write_scenario

SHIPPED = sorted(glob.glob(os.path.join(cfg.SCENARIO_DIR, "*.toml")))


@pytest.mark.parametrize("path", SHIPPED, ids=os.path.basename)
def test_shipped_scenarios_load(path):
    scenario = load_scenario(path)
    assert scenario.source == path
    assert set(scenario.checks) <= set(cfg.CHECK_NAMES)
    assert scenario.data.x.size == scenario.grid.nx
    assert os.path.isabs(scenario.output_dir)


def test_defaults_fill_an_empty_scenario():
    scenario = scenario_from_dict({})
    assert scenario.checks == cfg.CHECK_NAMES
    assert scenario.levi_depth == cfg.LEVI_DEPTH
    assert scenario.grid.nx == cfg.GRID_NX
    assert scenario.quad.n_space == cfg.SOLVER_QUAD["n_space"]
    assert 0.9 < scenario.data.u0_1.max() <= cfg.DEFAULT_PROFILES["u1"]["height"]


def test_overrides_reach_the_typed_configs(tmp_path):
    scenario = load_scenario(write_scenario(tmp_path, TINY_DEFAULT_TOML))
    assert scenario.name == "tiny"
    assert scenario.grid.nx == 24
    assert scenario.quad.n_space == 16
    assert scenario.quad.lattice_levels == 6
    assert scenario.fd.refine == 2
    assert scenario.checks == ("sector", "fuel", "quadrant", "lp_envelope", "continuity")


def test_seed_reaches_picard():
    scenario = scenario_from_dict({"seed": 11, "picard": {"max_iters": 7, "ball_radius": [2.0, 3.0]}})
    assert scenario.seed == 11
    assert scenario.picard.seed == 11
    assert scenario.picard.max_iters == 7
    assert scenario.picard.ball_radius == (2.0, 3.0)


def test_relative_output_dir_resolves_under_base_dir(tmp_path):
    path = write_scenario(tmp_path, 'output_dir = "results/here"\n')
    assert load_scenario(path).output_dir == os.path.join(cfg.BASE_DIR, "results", "here")
    unnamed = load_scenario(write_scenario(tmp_path, "", filename="plain.toml"))
    assert unnamed.name == "plain"
    assert unnamed.output_dir == os.path.join(cfg.DEFAULT_OUT_DIR, "plain")


@pytest.mark.parametrize("raw", [
    {"levi_depth": 0},
    {"levi_depth": 2.5},
    {"seed": "zero"},
    {"horizon": 0.0},
    {"extras": {}},
    {"grid": {"nx": 48, "cells": 10}},
    {"grid": {"nx": 8}},
    {"params": {"q": -1.0}},
    {"data": {"u1": {"family": "triangle"}}},
    {"data": {"u1": {"family": "gaussian-bump", "width": -1.0}}},
    {"data": {"w1": {"family": "zero"}}},
    {"picard": {"window_shrink_factor": 1.5}},
    {"fd": {"theta": 2.0}},
    {"fd": {"refine": 0}},
    {"fd": {"boundary": "periodic"}},
    {"quadrature": {"n_space": 0}},
    {"checks": {"names": ["sector", "entropy"]}},
    {"checks": {"p_values": [1.0]}},
    {"checks": {"eps": [-0.1]}},
    {"horizon": "soon"},
    {"horizon": True},
    {"checks": {"delta": "big"}},
    {"checks": {"tol": [1]}},
    {"checks": {"eps": ["x"]}},
    {"checks": {"p_values": 2.0}},
    {"checks": {"names": "sector"}},
    {"picard": {"ball_radius": 2.0}},
], ids=lambda raw: repr(raw))
def test_invalid_scenarios_raise(raw):
    with pytest.raises(ConfigurationError):
        scenario_from_dict(raw)


def test_unreadable_files_raise(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        load_scenario(str(tmp_path / "missing.toml"))
    with pytest.raises(ConfigurationError, match="not valid TOML"):
        load_scenario(write_scenario(tmp_path, "[grid\nnx = 4"))


def test_profile_families():
    x = np.linspace(-4.0, 4.0, 81)
    bump = build_profile(x, {"family": "gaussian-bump", "center": 1.0, "width": 0.5, "height": 2.0})
    assert bump.max() == pytest.approx(2.0)
    assert x[np.argmax(bump)] == pytest.approx(1.0)
    box = build_profile(x, {"family": "plateau", "width": 2.0, "ramp": 0.1})
    assert box[40] == pytest.approx(1.0, abs=1e-6)
    assert box[0] == pytest.approx(0.0, abs=1e-6)
    assert np.all(build_profile(x, {"family": "constant", "level": 0.3}) == 0.3)
    assert not np.any(build_profile(x, {"family": "zero"}))


def test_profile_errors():
    x = np.linspace(-1.0, 1.0, 5)
    with pytest.raises(ConfigurationError):
        build_profile(x, {"family": "zero", "level": 1.0})
    with pytest.raises(ConfigurationError):
        build_profile(x, {"family": "constant", "level": float("nan")})
    with pytest.raises(ConfigurationError):
        build_profile(x, {"family": "constant", "level": True})
    with pytest.raises(ConfigurationError):
        initial_data_from_specs(x, {"u1": {"family": "zero"}})


def test_grid_spacing_and_refinement():
    grid = GridSpec(half_width=4.0, nx=17, T=0.3, nt=4)
    assert grid.dx == pytest.approx(0.5)
    assert grid.dt == pytest.approx(0.1)
    assert grid.times(1.0)[[0, -1]] == pytest.approx([1.0, 1.3])
    fine = grid.refined(2)
    assert (fine.nx, fine.nt) == (33, 7)
    assert np.allclose(fine.x()[::2], grid.x())
    assert grid.with_window(0.1).T == 0.1


def test_state_is_read_only_and_validated():
    x, t = np.linspace(-1, 1, 16), np.linspace(0, 1, 4)
    state = make_state(x, t, np.zeros((4, 16)))
    with pytest.raises(ValueError):
        state.u1[0, 0] = 1.0
    with pytest.raises(ConfigurationError):
        state.with_fields(u2=np.zeros((3, 16)))
    frame = state.to_frame()
    assert list(frame.columns) == ["t", "x", "u1", "u2", "y1", "y2"]
    assert len(frame) == 64


def test_concat_drops_the_repeated_level():
    x = np.linspace(-1, 1, 16)
    first = make_state(x, np.linspace(0.0, 0.3, 4), 1.0)
    second = make_state(x, np.linspace(0.3, 0.6, 4), 2.0)
    joined = SystemState.concat([first, second])
    assert joined.t == pytest.approx(np.linspace(0.0, 0.6, 7))
    assert joined.u1[3, 0] == 1.0
    assert joined.u1[4, 0] == 2.0
    with pytest.raises(ConfigurationError):
        SystemState.concat([])
    with pytest.raises(ConfigurationError):
        SystemState.concat([first, make_state(np.linspace(-2, 2, 16), np.linspace(0.3, 0.6, 4), 0.0)])
