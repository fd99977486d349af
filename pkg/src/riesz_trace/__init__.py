"""Trace-space Riesz bases and very weak Dirichlet solves on P1 meshes."""

from .assembly import FormSet, assemble_forms, interpolate, l2_error
from .estimator import RieszTraceTransformer
from .geometry import Mesh, MeshParseError, MeshValidationError, generate_structured_mesh, load_mesh, validate_mesh, write_mesh
from .hilbert import HilbertSpaceRep, OperatorRep, adjoint, op_norm, pseudo_inverse, verify_mp_identities
from .operators import (
    ConsistencyError,
    InconsistentDataError,
    OperatorSuite,
    build_core,
    conormal_derivative,
    dirichlet_poisson_solve,
    harmonic_lift,
    rellich_ratio,
)
from .riesz import RankCollapseError, RieszBasisPair, bessel_check, build_bases, reconstruction_check, riesz_bounds
from .solver import VeryWeakSolution, regularity_report, very_weak_solve, weak_form_residual
from .spectral import EigenSystem, OutsideHarmonicSpanError, eigendecompose_core, h1_equivalence_check, hs_norm

__version__ = "0.1.0"
