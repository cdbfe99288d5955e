"""Vanilla gradient descent for rectangular low-rank matrix completion.

Submodules: :mod:`~vanillamc.linalg` (SVD, Procrustes, norms),
:mod:`~vanillamc.problem` (planted matrices, masks, projectors),
:mod:`~vanillamc.solver` (objective, spectral init, gradient descent),
:mod:`~vanillamc.leaveoneout` (auxiliary sequences and their diagnostics),
:mod:`~vanillamc.diagnostics` (Hessian form, deviation bounds, gradient
checks) and :mod:`~vanillamc.harness` (seeded sweeps and reports).
"""

from .linalg import procrustes, sign_matrix, spectral_norm, top_r_svd
from .problem import (
    GroundTruth,
    SamplingMask,
    condition_number,
    generate_ground_truth,
    incoherence,
    project_omega,
    sample_mask,
)
from .solver import (
    FactorPair,
    SolverConfig,
    TrajectoryRecord,
    default_step_size,
    gd_step,
    gradient,
    objective,
    projected_gd_step,
    run,
    solve,
    spectral_init,
)

__version__ = "0.1.0"
