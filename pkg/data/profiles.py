"""
data/profiles.py — Initial Profile Families
===========================================
Named families used by scenario files to describe u0_1, u0_2, y0_1, y0_2:

  gaussian-bump(center, width, height)        height·exp(−((x−center)/width)²)
  plateau(center, width, height, ramp)        smoothed box of half-width `width`
  constant(level)                             level everywhere
  zero()                                      0 everywhere

Every family is nonnegative and Lipschitz, as the initial data must be.
"""

import numpy as np
import sys
import os

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config as cfg
from models.combustion import InitialData
from models.errors import ConfigurationError


def gaussian_bump(x, center: float = 0.0, width: float = 1.0, height: float = 1.0) -> np.ndarray:
    return height * np.exp(-(((np.asarray(x, dtype=float) - center) / width) ** 2))


def plateau(x, center: float = 0.0, width: float = 2.0, height: float = 1.0, ramp: float = 0.5) -> np.ndarray:
    """tanh-smoothed box; Lipschitz constant height/(2·ramp) at most."""
    z = np.asarray(x, dtype=float) - center
    return height * 0.5 * (np.tanh((z + width) / ramp) - np.tanh((z - width) / ramp))


def constant(x, level: float = 1.0) -> np.ndarray:
    return np.full(np.shape(x), float(level))


def zero(x) -> np.ndarray:
    return np.zeros(np.shape(x))


# family -> (builder, defaults, parameters that must be > 0, parameters that must be >= 0)
PROFILE_BUILDERS = {
    "gaussian-bump": (gaussian_bump, {"center": 0.0, "width": 1.0, "height": 1.0}, ("width",), ("height",)),
    "plateau":       (plateau,       {"center": 0.0, "width": 2.0, "height": 1.0, "ramp": 0.5}, ("width", "ramp"), ("height",)),
    "constant":      (constant,      {"level": 1.0}, (), ("level",)),
    "zero":          (zero,          {}, (), ()),
}


def build_profile(x, spec: dict) -> np.ndarray:
    """
    Sample one profile spec on the grid.

    Parameters
    ----------
    x    : (nx,) spatial nodes
    spec : dict — {"family": name, **parameters}

    Raises
    ------
    ConfigurationError for unknown families, unknown parameters or values
    outside the family's domain.
    """
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in PROFILE_BUILDERS:
        raise ConfigurationError(f"unknown profile family {family!r}; expected one of {cfg.PROFILE_FAMILIES}")
    builder, defaults, positive, nonnegative = PROFILE_BUILDERS[family]
    unknown = set(spec) - set(defaults)
    if unknown:
        raise ConfigurationError(f"profile family {family!r} has no parameter(s) {sorted(unknown)}")
    kwargs = {**defaults, **spec}
    for name, value in kwargs.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
            raise ConfigurationError(f"{family}.{name} must be a finite number, got {value!r}")
    for name in positive:
        if kwargs[name] <= 0:
            raise ConfigurationError(f"{family}.{name} must be > 0, got {kwargs[name]}")
    for name in nonnegative:
        if kwargs[name] < 0:
            raise ConfigurationError(f"{family}.{name} must be >= 0, got {kwargs[name]}")
    return builder(x, **kwargs)


def initial_data_from_specs(x, specs: dict = cfg.DEFAULT_PROFILES) -> InitialData:
    """InitialData from a {"u1", "u2", "y1", "y2"} mapping of profile specs."""
    missing = {"u1", "u2", "y1", "y2"} - set(specs)
    if missing:
        raise ConfigurationError(f"initial data missing profile(s) {sorted(missing)}")
    profs = [build_profile(x, specs[k]) for k in ("u1", "u2", "y1", "y2")]
    return InitialData.from_profiles(x, *profs)


if __name__ == "__main__":
    xs = np.linspace(-cfg.GRID_HALF_WIDTH, cfg.GRID_HALF_WIDTH, cfg.GRID_NX)
    data = initial_data_from_specs(xs)
    for name, lip in zip(InitialData.profile_names, data.lip_bound):
        prof = getattr(data, name)
        print(f"  {name}: max {prof.max():.4f}  Lipschitz {lip:.4f}")
    print("\n[profiles.py] OK")
