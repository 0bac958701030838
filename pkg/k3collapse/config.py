import os

# ---------------------------------------------------------------------------
# Environment defaults: every CLI flag can be overridden with K3C_<FLAG>
# ---------------------------------------------------------------------------

DEFAULT_OUT_DIR = os.getenv("K3C_OUT", "out")
DEFAULT_CACHE = os.getenv("K3C_CACHE", "off")
DEFAULT_SEED = int(os.getenv("K3C_SEED", "0"))
DEFAULT_JOBS = int(os.getenv("K3C_JOBS", "1"))

# ---------------------------------------------------------------------------
# Fibration
# ---------------------------------------------------------------------------

MAX_DEG_A = 8
MAX_DEG_B = 12
ROOT_SEPARATION_TOL = 1e-8      # distinct roots closer than this are a cluster error
ROOT_CLUSTER_HINT = 1e-4        # numeric roots closer than this go through exact sqf
NEWTON_RESIDUAL_TOL = 1e-12
ORDER_REL_TOL = 1e-9            # relative size below which a Taylor coefficient counts as zero
INFINITE_ORDER = 999            # vanishing order of the zero polynomial

# ---------------------------------------------------------------------------
# Periods
# ---------------------------------------------------------------------------

DISCRIMINANT_PROXIMITY = 1e-10
AGM_TOL = 1e-15
AGM_MAX_ITER = 80
LATTICE_CHECK_TOL = 1e-8        # g2/g3 reconstruction from the AGM basis
J_CONSISTENCY_TOL = 1e-8        # |j(tau) - j(a, b)| / max(1, |j|)
EISENSTEIN_TERMS = 12

MARKING_RESIDUAL = 1e-3         # max distance from an integer matrix when re-marking
MARKING_GROW_RESIDUAL = 1e-5    # below this the step grows
MAX_DELTA_TAU = 0.1
STEP_GROWTH = 1.5
STEP_FRACTION_OF_DISTANCE = 0.25
MIN_STEP = 1e-13

MONODROMY_RESIDUAL = 1e-6
MONODROMY_MIN_POINTS = 64
MONODROMY_MAX_POINTS = 4096
QUASI_UNIPOTENT_MAX_BETA = 12
UNTWIST_TOL = 1e-7

# ---------------------------------------------------------------------------
# Volume
# ---------------------------------------------------------------------------

MIN_FIT_LEVELS = 12
MIN_FIT_RADIUS = 1e-8
MAX_LOG_POWER = 3
ALPHA_LOWER_BOUND = -2.0
ALPHA_MARGIN = 0.01

# ---------------------------------------------------------------------------
# Limit metric
# ---------------------------------------------------------------------------

R_MIN = 1e-6
RING_ANGLES = 16
CAUCHY_TOL = 1e-4
LENGTH_BOUND_LEVELS = 6
AREA_REFINEMENT_TOL = 1e-3

# ---------------------------------------------------------------------------
# Special Kähler / semi-flat
# ---------------------------------------------------------------------------

FD_STEP = 1e-4
FD_STEP_FINE = 5e-5
HESSIAN_TOL = 1e-5
MONGE_AMPERE_TOL = 1e-4
AFFINE_RESIDUAL = 1e-6
VOLUME_IDENTITY_TOL = 1e-8
J_MATCH_TOL = 1e-10
SCALING_SLOPE = 0.5
SCALING_SLOPE_TOL = 0.02
