"""Blade envelopes: performance-invariant tolerance design for airfoils.

The package discovers the subspace of shape deformations a scalar
performance measure is blind to, samples manufacturing-like variation
inside it, and condenses the result into an envelope with a
scrap-or-use gate for measured parts.
"""

from .envelope import (
    BladeEnvelope,
    LogisticGate,
    VerdictReport,
    build_envelope,
    calibrate_gate,
    chi2_threshold,
    gate_score,
    in_control_zone,
    mahalanobis,
    verdict,
)
from .geometry import AirfoilProfile, FFDLattice, deform, displacement, resample
from .ingest import doe_uniform, isentropic_mach, loss_coefficient, mass_flow_function
from .kernels import backend_name
from .sampler import InactivePolytope, build_polytope, chebyshev_center, hit_and_run, lift
from .subspace import SubspacePartition, active_coordinate, estimate_covariance, partition
from .surrogate import MultiIndexSet, Surrogate, build_index_set, eval_basis, fit, r_squared

__version__ = "0.1.0"

__all__ = [
    "AirfoilProfile",
    "BladeEnvelope",
    "FFDLattice",
    "InactivePolytope",
    "LogisticGate",
    "MultiIndexSet",
    "SubspacePartition",
    "Surrogate",
    "VerdictReport",
    "active_coordinate",
    "backend_name",
    "build_envelope",
    "build_index_set",
    "build_polytope",
    "calibrate_gate",
    "chebyshev_center",
    "chi2_threshold",
    "deform",
    "displacement",
    "doe_uniform",
    "estimate_covariance",
    "eval_basis",
    "fit",
    "gate_score",
    "hit_and_run",
    "in_control_zone",
    "isentropic_mach",
    "lift",
    "loss_coefficient",
    "mahalanobis",
    "mass_flow_function",
    "partition",
    "r_squared",
    "resample",
    "verdict",
    "__version__",
]
