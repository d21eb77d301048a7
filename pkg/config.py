import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Output and logging
OUTPUT_DIR = os.getenv("DSCM_OUTPUT_DIR", "outputs")
LOG_LEVEL = os.getenv("DSCM_LOG_LEVEL", "INFO")

# Run defaults (overridable per invocation with CLI flags)
DEFAULT_TOL = float(os.getenv("DSCM_TOL", "1e-3"))
DEFAULT_SEED = int(os.getenv("DSCM_SEED", "0"))
DEFAULT_ICS = int(os.getenv("DSCM_ICS", "5"))
DEFAULT_TRIALS = int(os.getenv("DSCM_TRIALS", "3"))

# Trajectory algebra
AMPLITUDE_EPS = 1e-9
FREQUENCY_MERGE_EPS = 1e-12

# Integrator
MAX_DT = 0.01
STEPS_PER_PERIOD = 50
BLOWUP_THRESHOLD = 1e12

# Stability checks
TRANSIENT_FRACTION = 0.5
IC_BOX_HALF_WIDTH = 5.0
DEFAULT_HORIZON = 100.0
MAX_HORIZON = 5000.0
SETTLING_SCALE = 50.0

# DSCM derivation and solving
SINGULAR_EPS = 1e-10
COEFFICIENT_TOL = 1e-12
SOLUTION_CHECK_TOL = 1e-9

# Discretization study: reference RK4 step is the smallest delta divided by this
REFERENCE_REFINEMENT = 16
