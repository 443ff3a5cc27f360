"""
Numerical constants and defaults shared across kawlab.
"""

import math

KAWLAB_APP_NAME = "kawlab"
KAWLAB_THREADS_ENV = "KAWLAB_THREADS"

# Transform and linear-algebra caps
MAX_SVD_DIM = 256
MAX_TRANSFORM_LENGTH = 2 ** 20
MAX_COHERENCE_N = 4096
MAX_PROJECTOR_COLS = 1024

# Minimum enclosing ball iteration
MEB_TOLERANCE = 1e-9
MEB_MAX_STEPS = 100_000

# Primal-dual solver
PDHG_TOLERANCE = 1e-9
PDHG_MAX_ITER = 100_000
POWER_ITERATIONS = 20
STEP_SAFETY = 0.95
FEASIBILITY_REL_TOL = 1e-8
DUALITY_GAP_TOL = 1e-8
OBJECTIVE_TOLERANCE = 1e-6

# Recovery-bound constants for sparse-in-levels recovery
RECOVERY_C = 2 * (2 + math.sqrt(3)) / (2 - math.sqrt(3))
RECOVERY_D = 8 * math.sqrt(2) / (2 - math.sqrt(3))

# Certification
ENUMERATION_CAP = 1_000_000
RNSP_ITERATIONS = 10_000
SUPPORT_BLOCK = 4096

# Adam defaults
ADAM_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Instability probes
SPSA_ALPHA = 0.602
SPSA_GAMMA = 0.101
WILSON_Z95 = 1.959963984540054
TRIAL_BLOCK = 64

# Fiber grouping
FIBER_TOLERANCE = 1e-10

# Tumour signal default norm
TUMOR_NORM = 0.4

# Binary formats
CVEC_MAGIC = b"KAWCVEC1"
NETWORK_MAGIC = b"KAWNET1\x00"


def cs_lipschitz_cap(r: int) -> float:
    """Upper bound on the epsilon-Lipschitz constant of the weighted QCBP decoder."""
    return 2 * math.sqrt(2) + (1 + r ** 0.25) * RECOVERY_D


__all__ = [
    'KAWLAB_APP_NAME',
    'KAWLAB_THREADS_ENV',
    'MAX_SVD_DIM',
    'MAX_TRANSFORM_LENGTH',
    'MAX_COHERENCE_N',
    'MAX_PROJECTOR_COLS',
    'MEB_TOLERANCE',
    'MEB_MAX_STEPS',
    'PDHG_TOLERANCE',
    'PDHG_MAX_ITER',
    'POWER_ITERATIONS',
    'STEP_SAFETY',
    'FEASIBILITY_REL_TOL',
    'DUALITY_GAP_TOL',
    'OBJECTIVE_TOLERANCE',
    'RECOVERY_C',
    'RECOVERY_D',
    'ENUMERATION_CAP',
    'RNSP_ITERATIONS',
    'SUPPORT_BLOCK',
    'ADAM_LR',
    'ADAM_BETA1',
    'ADAM_BETA2',
    'ADAM_EPS',
    'SPSA_ALPHA',
    'SPSA_GAMMA',
    'WILSON_Z95',
    'TRIAL_BLOCK',
    'FIBER_TOLERANCE',
    'TUMOR_NORM',
    'CVEC_MAGIC',
    'NETWORK_MAGIC',
    'cs_lipschitz_cap',
]
