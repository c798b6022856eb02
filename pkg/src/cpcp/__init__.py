"""Low-rank plus sparse recovery from reduced linear measurements.

The package provides dense proximal linear algebra, projector algebra for
the structured subspaces of the problem, synthetic instance generators, an
augmented Lagrangian solver with an independent desk-scale oracle, dual
certificate construction and verification, and an experiment harness with a
command line front end.
"""

from .linalg import SvdFactors, inner, norm, soft_threshold, svd, svt
from .subspaces import (
    Complement,
    DegenerateSum,
    DirectSum,
    SpanBasis,
    SupportSet,
    TangentSpace,
    check_direct_sum,
    coherence_mu,
    gamma_constrained,
    nu_coherence,
    op_norm_product,
    project_T,
    project_direct_sum,
    project_span,
    project_support,
)
from .generate import (
    GenParams,
    ProblemInstance,
    assemble,
    basis_from_jacobians,
    gen_low_rank,
    gen_nu_coherent_qperp,
    gen_random_qperp,
    gen_sparse,
    load_bundle,
    save_bundle,
    synthetic_image_jacobians,
)
from .solver import SolverOptions, SolverResult, oracle_solve, solve_cpcp, solve_pcp
from .certificate import (
    CertificateReport,
    GolfingSchedule,
    PremiseReport,
    PremiseViolation,
    build_schedule,
    certify_instance,
    check_premises,
    construct_WL,
    construct_WQ,
    construct_WS,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "SvdFactors", "svd", "norm", "svt", "soft_threshold", "inner",
    "SupportSet", "TangentSpace", "SpanBasis", "Complement", "DirectSum",
    "DegenerateSum", "project_T", "project_support", "project_span",
    "project_direct_sum", "op_norm_product", "coherence_mu", "nu_coherence",
    "gamma_constrained", "check_direct_sum",
    "GenParams", "ProblemInstance", "gen_low_rank", "gen_sparse",
    "gen_random_qperp", "gen_nu_coherent_qperp", "basis_from_jacobians",
    "synthetic_image_jacobians", "assemble", "save_bundle", "load_bundle",
    "SolverOptions", "SolverResult", "solve_cpcp", "solve_pcp", "oracle_solve",
    "GolfingSchedule", "CertificateReport", "PremiseReport", "PremiseViolation",
    "build_schedule", "construct_WL", "construct_WS", "construct_WQ",
    "verify", "check_premises", "certify_instance",
]
