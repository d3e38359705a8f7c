"""
Dissipative Chaos Toolbox - Configuration
"""
from pathlib import Path

# Paths
BASE_DIR = Path(__file__).parent
PRESETS_DIR = BASE_DIR / "presets"
RESULTS_DIR = BASE_DIR / "results"

# Size budgets
MAX_OPERATOR_DIM = 1 << 14      # kron refuses products above this
DENSE_THRESHOLD = 4096          # matexp / dense propagation limit
MAX_SPIN_SITES = 10             # integrable chain, dim 2^M
SUPEROPERATOR_MAX_DIM = 4900    # N^2 limit for building the Lindbladian
SPECTRUM_MAX_DIM = 5000         # N^2 limit for the dense eigensolver

# Tolerances
HERMITIAN_TOL = 1e-12
NORM_REL_TOL = 1e-10
EXPECTATION_IMAG_TOL = 1e-10    # |Im <O>| relative to ||O||
NORM_UNDERFLOW = 1e-300
DENSITY_TOL = 1e-8              # trace / hermiticity / PSD of input rho
PSD_DRIFT_TOL = 1e-6            # evolve_density instability threshold
MONOTONE_NORM_TOL = 1e-12
SPECTRUM_TOL = 1e-8
SPECTRUM_RESIDUAL_SAMPLES = 10

# Model defaults (MBL chain)
DEFAULT_J = 1.0
DEFAULT_U = 1.0
DEFAULT_GAMMA = 0.1
DEFAULT_W = 1.0

# Model defaults (integrable chain)
DEFAULT_ETA_B1 = 1
DEFAULT_KAPPA_B1 = -1
DEFAULT_GAMMA_B1 = 1.0

# Trajectory defaults
TRAJECTORY_DT = 1e-2
PROPAGATOR_LADDER_DEPTH = 16    # largest block is 2^16 steps
DENSITY_DT = 0.1

# Lyapunov defaults
DELTA0 = 1e-6
TAU_INTEGRABLE = 5.0
TAU_MBL = 10.0
N_RENORMS = 100
TRANSIENT_INTEGRABLE = 100.0
TRANSIENT_MBL = 1000.0
BISECT_REL_TOL = 1e-3           # tol = BISECT_REL_TOL * delta0
BISECT_MAX_ITER = 200
BISECT_MAX_DOUBLINGS = 100      # bracket capped at 2^100 * delta0
MAX_DEGENERATE_DIRECTIONS = 10
DISTANCE_FLOOR = 1e-300

# CSR defaults
CSR_BINS = 50
CSR_MARGINAL_BINS = 50
CSR_STRIPE_HALFWIDTH = 0.05
CSR_DEGENERACY_FLOOR = 1e-12    # relative to spectral diameter
CSR_DEPLETION_RADIUS = 0.25
CSR_DROP_STATIONARY = False

# Harness
CONFIG_SCHEMA_VERSION = 1
DEFAULT_WORKERS = 1
DEFAULT_MASTER_SEED = 20210901
TRACE_STRIDE = 10               # steps between trace rows
CODE_VERSION = "1.0.0"
EXPERIMENT_KINDS = (
    "le_distribution",
    "le_sweep",
    "csr_experiment",
    "trajectory_trace",
    "unraveling_check",
)
MODEL_KINDS = ("integrable_b1", "mbl")
