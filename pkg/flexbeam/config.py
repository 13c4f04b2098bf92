"""Environment configuration and numerical defaults. All units are SI."""

import os

from dotenv import load_dotenv

load_dotenv()

# --- Environment ---

FLEXBEAM_THREADS: int = max(
    1, int(os.getenv("FLEXBEAM_THREADS", str(os.cpu_count() or 1)))
)
FLEXBEAM_LOG_DIR: str = os.getenv("FLEXBEAM_LOG_DIR", "logs")

# --- Reference beam (experimental rig) ---
# rho(x) = 0.11 (1 + 3x) kg/m, EI(x) = 0.297 (1 + 3x) N m^2
REFERENCE_BEAM: dict = {
    "L": 0.5,
    "m": 0.402,
    "J": 1.9e-4,
    "rho": {"kind": "affine", "a": 0.11, "b": 3.0},
    "ei": {"kind": "affine", "a": 0.297, "b": 3.0},
}

# --- Beam model ---
MIN_GRID_INTERVALS: int = 16
PROBE_POINTS: int = 1000

# --- Generating functions ---
GENFUN_INTERVALS: int = 512
REFINEMENT_RTOL: float = 1e-10
BOUND_ATOL: float = 1e-12
BOUND_RTOL: float = 1e-8

# --- Trajectory planning ---
DEFAULT_N: int = 20
DEFAULT_S: float = 1.5
DEFAULT_T: float = 3.0
TIME_SAMPLES: int = 601
JET_SLACK: int = 4  # K = 2N + JET_SLACK
QUAD_RTOL: float = 1e-12
QUAD_ATOL: float = 1e-300
# psi_0 is exactly zero in double precision once its exponent passes this
UNDERFLOW_EXPONENT: float = 708.0

# --- Finite-difference simulator ---
MIN_SIM_INTERVALS: int = 32
SIM_INTERVALS: int = 150
SIM_DT: float = 1e-4
COMPATIBILITY_TOL: float = 1e-8

# --- Acceptance thresholds ---
SETTLING_FRACTION: float = 0.01  # of travel
FIELD_AGREEMENT: float = 0.02  # of max |w|
