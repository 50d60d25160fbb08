"""
config.py — Central Parameter Store
====================================
All default values for the two-layer porous-media combustion solver and its
verification harness live here and only here. Every module imports from this
file; scenario TOML files override a subset of these values per run.

When assumptions change, update assumptions.md FIRST, then this file.
"""

import os

# ---------------------------------------------------------------------------
# Reproducibility
# ---------------------------------------------------------------------------
RANDOM_SEED = 0                      # Hölder pair sampling; top-level scenario key

# ---------------------------------------------------------------------------
# Model Constants — synthetic order-1 values (no physical calibration)
# ---------------------------------------------------------------------------
# Layer 1 is the "hot" layer, layer 2 slightly less diffusive and slower burning.
MODEL_PARAMS = {
    "lambda_1": 1.0,    "lambda_2": 0.8,     # thermal diffusivity numerators
    "a_1":      1.0,    "a_2":      1.2,     # heat capacity, solid part
    "b_1":      0.5,    "b_2":      0.4,     # heat capacity, fuel part
    "c_1":      0.5,    "c_2":      0.3,     # gas convection
    "d_1":      0.2,    "d_2":      0.1,     # reaction offset
    "A_1":      1.0,    "A_2":      0.8,     # fuel consumption rates
    "q":        0.5,                         # inter-layer heat transfer
    "E":        1.0,                         # activation energy
}

# ---------------------------------------------------------------------------
# Initial Data — profile families (see data/profiles.py)
# ---------------------------------------------------------------------------
PROFILE_FAMILIES = ("gaussian-bump", "plateau", "constant", "zero")

DEFAULT_PROFILES = {
    "u1": {"family": "gaussian-bump", "center": 0.0, "width": 1.0, "height": 1.0},
    "u2": {"family": "gaussian-bump", "center": 0.0, "width": 1.0, "height": 0.8},
    "y1": {"family": "constant", "level": 1.0},
    "y2": {"family": "constant", "level": 1.0},
}

# ---------------------------------------------------------------------------
# Space-Time Lattice
# ---------------------------------------------------------------------------
GRID_HALF_WIDTH = 8.0       # L: spatial truncation radius
GRID_NX         = 48        # spatial nodes on [-L, L]
GRID_T          = 0.25      # local window length
GRID_NT         = 6         # time levels per window (t=0 included)
GRID_P          = 2.0       # Lebesgue exponent for norm tracking
HORIZON         = 0.75      # global march: three default windows

# ---------------------------------------------------------------------------
# Kernel — Levi series and quadrature
# ---------------------------------------------------------------------------
LEVI_DEPTH          = 12        # cap on the Levi series index M
LEVI_TAIL_RTOL      = 1e-8      # adaptive depth: tail < RTOL * dt^(-1/2)
LEVI_TAIL_TERMS     = 400       # tail-majorant terms summed per block
LEVI_NEGLIGIBLE     = 1e-14     # iterate / first-iterate ratio treated as zero
TAIL_K_INFLATION    = 2.0       # fitted K is inflated by this factor
LEVI_ALPHA_FLOOR    = 0.0       # extra Hölder gain added to kα−3 in the tail exponent

# Kernel-grade policy (pointwise Γ evaluation, self-test)
QUAD_N_SPACE        = 48        # spatial nodes per kernel integral
QUAD_N_TIME         = 24        # temporal nodes per kernel integral (split in two halves)
QUAD_SPACE_PANELS   = 4
QUAD_TIME_PANELS    = 2         # panels per half-interval
QUAD_SING_EXPONENT  = 2.0       # sigma = tau + r^p
QUAD_HALFWIDTH      = 8.0       # Gaussian deviations kept on each side
LATTICE_LEVELS      = 24        # sqrt-time levels of the Levi lattice
LATTICE_NODES       = 121       # similarity nodes per level

# Solver-grade policy (whole-lattice propagation inside Picard)
SOLVER_QUAD = {
    "n_space": 40,
    "n_time": 16,
    "space_panels": 4,
    "time_panels": 1,
    "lattice_levels": 12,
}

TARGET_CHUNK = 256          # targets per worker task
MAX_THREADS  = max(1, min(8, os.cpu_count() or 1))

# ---------------------------------------------------------------------------
# Tail-constant fitting lattice
# ---------------------------------------------------------------------------
TAILFIT_DT_RANGE = (0.01, 0.9)   # fraction of the horizon spanned by t - tau
TAILFIT_N_DT     = 8
TAILFIT_N_X      = 25
TAILFIT_Q_MAX    = 3.0          # |x - xi| up to this many sqrt(2*lambda1*dt)

# ---------------------------------------------------------------------------
# Picard Iteration (local existence)
# ---------------------------------------------------------------------------
PICARD_TOL            = 1e-7    # sup-node gap stopping threshold
PICARD_MAX_ITERS      = 25
PICARD_SHRINK         = 0.5     # window_shrink_factor
BALL_SLACK            = 2.0     # M_i = 2 * K_i * ||u_i0||_1, K_i from kernel.propagation_constant
HOLDER_RANDOM_PAIRS   = 2000    # distant node pairs sampled for the Hölder quotient

# ---------------------------------------------------------------------------
# Finite-Difference Oracle
# ---------------------------------------------------------------------------
FD_REFINE       = 4             # oracle resolution factor over the solver grid
FD_THETA        = 0.5           # Crank–Nicolson diffusion
FD_BOUNDARY     = "constant-extension"
FD_BOUNDARIES   = ("constant-extension", "dirichlet")

# ---------------------------------------------------------------------------
# Verification Checks
# ---------------------------------------------------------------------------
CHECK_NAMES = (
    "sector", "fuel", "quadrant", "comparison", "lp_envelope",
    "gradient", "continuity", "stability",
)
CHECK_TOL           = 1e-8
COMPARISON_DELTA    = 1e-3
COMPARISON_RATIO    = (1.6, 2.4)
COMPARE_REL_TOL     = 5e-2      # compare: Picard vs oracle relative sup gap
STABILITY_EPS       = (1e-1, 5e-2, 2.5e-2)
STABILITY_DECAY     = 0.8
GRADIENT_GROWTH     = 2.0       # final-window max <= 2x first-window max
EDGE_FRACTION       = 1e-3      # edge values relative to interior max
CONTINUITY_CEILING  = 1e3       # sup |du| / sqrt(dt) considered runaway
LP_KBAR             = 1.0       # sup_xi ∫|Γ|dx for c = 0 kernels
LP_P_VALUES         = (2.0, 4.0)

# ---------------------------------------------------------------------------
# Kernel Self-Test (CLI kernel-selftest)
# ---------------------------------------------------------------------------
SELFTEST_EXACT_TOL      = 1e-12
SELFTEST_ADVECTION_TOL  = 1e-6
SELFTEST_MASS_TOL       = 1e-3
SELFTEST_DELTA_FINAL    = 0.05
SELFTEST_DELTA_DT       = (0.1, 0.05, 0.025)
SELFTEST_RESIDUAL_TOL   = 5e-2  # residual relative to |Γ_t| scale
SELFTEST_SEMIGROUP_TOL  = 1e-3

# ---------------------------------------------------------------------------
# Output Paths & File Names
# ---------------------------------------------------------------------------
BASE_DIR          = os.path.dirname(os.path.abspath(__file__))
SCENARIO_DIR      = os.path.join(BASE_DIR, "scenarios")
DEFAULT_SCENARIO  = os.path.join(SCENARIO_DIR, "default.toml")
DEFAULT_OUT_DIR   = os.path.join(BASE_DIR, "results")

CSV_FLOAT_FORMAT  = "%.17g"
METADATA_SUFFIX   = ".meta.json"
THREADS_ENV       = "PF_THREADS"
