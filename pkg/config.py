"""
Configuration module for the Couette stability lab
"""
import os
from dotenv import load_dotenv

load_dotenv()

# Lab Version (echoed in every manifest)
LAB_VERSION = "0.5.0"

# Output
# Default root for experiment artifacts; --out overrides it per run
OUTPUT_ROOT = os.getenv("COUETTE_OUTPUT_ROOT", "runs")

# Run registry (SQLite)
RUNS_DB = os.getenv("COUETTE_RUNS_DB", "couette_runs.db")

# Worker pool size for parameter grids
THREADS = int(os.getenv("COUETTE_THREADS", "1"))

# Logging
LOG_LEVEL = os.getenv("COUETTE_LOG_LEVEL", "INFO")

# Resolution defaults
DEFAULT_N = int(os.getenv("COUETTE_N", "64"))
DEFAULT_K = int(os.getenv("COUETTE_K", "32"))
DEFAULT_LX = float(os.getenv("COUETTE_LX", "100"))
DEFAULT_DT = float(os.getenv("COUETTE_DT", "0.01"))

# Norm exponents and viscosity
DEFAULT_M = 2.0
DEFAULT_EPS = 0.08
DEFAULT_NU = float(os.getenv("COUETTE_NU", "1e-3"))

# Initial amplitude A = EPS0 * nu^(1/2) when --A is not given
DEFAULT_EPS0 = 0.01

# Starting energy constants (replaced by calibration)
ENERGY_CONSTANTS = {
    "c_alpha": 0.05,
    "c_beta": 0.05,
    "c_tau": 0.05,
    "c0": 0.02,
}

# Threshold sweep viscosities
SWEEP_NUS = [10**-2.5, 1e-3, 10**-3.5]

# Operator sweep: 25 log-spaced wavenumbers on [1e-3, 1e3]
OPERATOR_K_RANGE = (1e-3, 1e3)
OPERATOR_K_POINTS = 25

# Artifact names
MANIFEST_NAME = "manifest.json"
FAILURE_NAME = "failure.json"
