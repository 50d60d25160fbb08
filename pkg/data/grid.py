"""
data/grid.py — Space-Time Lattice Containers
============================================
GridSpec describes the truncated lattice [−L, L] × [0, T]; SystemState holds
the fields a solve produces on it. Both the Picard solver and the
finite-difference oracle return SystemState, so trajectories compare and
serialise the same way.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg
from models.errors import ConfigurationError


@dataclass(frozen=True)
class GridSpec:
    """
    half_width : L, spatial truncation radius
    nx         : spatial nodes on [−L, L]
    T          : window length
    nt         : time levels including t = 0
    p          : Lebesgue exponent for norm tracking
    """

    half_width: float = cfg.GRID_HALF_WIDTH
    nx: int = cfg.GRID_NX
    T: float = cfg.GRID_T
    nt: int = cfg.GRID_NT
    p: float = cfg.GRID_P

    def __post_init__(self):
        if self.nx < 16:
            raise ConfigurationError(f"GridSpec.nx must be >= 16, got {self.nx}")
        if self.nt < 4:
            raise ConfigurationError(f"GridSpec.nt must be >= 4, got {self.nt}")
        if not self.half_width > 0:
            raise ConfigurationError("GridSpec.half_width must be positive")
        if not self.T > 0:
            raise ConfigurationError("GridSpec.T must be positive")
        if not self.p > 1:
            raise ConfigurationError("GridSpec.p must exceed 1")

    def x(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.nx)

    def times(self, t0: float = 0.0) -> np.ndarray:
        return t0 + np.linspace(0.0, self.T, self.nt)

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / (self.nx - 1)

    @property
    def dt(self) -> float:
        return self.T / (self.nt - 1)

    def with_window(self, T: float) -> "GridSpec":
        return replace(self, T=T)

    def refined(self, factor: int) -> "GridSpec":
        return replace(self, nx=(self.nx - 1) * factor + 1, nt=(self.nt - 1) * factor + 1)


@dataclass(frozen=True, eq=False)
class SystemState:
    """
    Solved fields on a lattice; every field array has shape (nt, nx).

    I1, I2 are the running reaction integrals ∫₀ᵗ f̃(u_i) dτ; y1, y2 the fuel
    they imply.
    """

    x: np.ndarray
    t: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    I1: np.ndarray
    I2: np.ndarray
    y1: np.ndarray
    y2: np.ndarray

    field_names = ("u1", "u2", "I1", "I2", "y1", "y2")

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        shape = (self.t.size, self.x.size)
        for name in self.field_names:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ConfigurationError(f"SystemState.{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def u(self, i: int) -> np.ndarray:
        return self.u1 if i == 1 else self.u2

    def y(self, i: int) -> np.ndarray:
        return self.y1 if i == 1 else self.y2

    def I(self, i: int) -> np.ndarray:
        return self.I1 if i == 1 else self.I2

    def final(self) -> dict:
        """Last time level of every field."""
        return {name: np.array(getattr(self, name)[-1]) for name in self.field_names}

    def with_fields(self, **fields) -> "SystemState":
        return replace(self, **fields)

    def to_frame(self) -> pd.DataFrame:
        """Long-form trajectory: columns t, x, u1, u2, y1, y2."""
        T, X = np.meshgrid(self.t, self.x, indexing="ij")
        return pd.DataFrame({
            "t":  T.ravel(),
            "x":  X.ravel(),
            "u1": self.u1.ravel(),
            "u2": self.u2.ravel(),
            "y1": self.y1.ravel(),
            "y2": self.y2.ravel(),
        })

    @classmethod
    def concat(cls, states: list["SystemState"]) -> "SystemState":
        """Chain consecutive windows; the first level of each later window repeats the previous last level and is dropped."""
        if not states:
            raise ConfigurationError("concat needs at least one state")
        first = states[0]
        parts = {name: [getattr(first, name)] for name in ("t",) + cls.field_names}
        for s in states[1:]:
            if s.x.shape != first.x.shape or not np.allclose(s.x, first.x):
                raise ConfigurationError("cannot concatenate states on different spatial grids")
            parts["t"].append(s.t[1:])
            for name in cls.field_names:
                parts[name].append(getattr(s, name)[1:])
        return cls(x=first.x, **{k: np.concatenate(v, axis=0) for k, v in parts.items()})
