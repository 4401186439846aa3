"""Standard-form conic programs and a first-order operator-splitting solver."""

from .cones import (ConeSpec, dist_to_cone, embed_hermitian, embed_svec, hmat,
                    hvec, project_onto_cone, project_onto_dual_cone, smat,
                    svec, svec_dim)
from .problem import (INFEASIBLE, MAX_ITERS, OPTIMAL, UNBOUNDED, ConicProblem,
                      HermVar, ProblemBuilder, SolveResult, SolverSettings,
                      constraint_violations, residuals)
from .solver import solve

__all__ = [
    "ConeSpec", "ConicProblem", "HermVar", "ProblemBuilder", "SolveResult",
    "SolverSettings", "constraint_violations", "dist_to_cone",
    "embed_hermitian", "embed_svec", "hmat", "hvec", "project_onto_cone",
    "project_onto_dual_cone", "residuals", "smat", "solve", "svec",
    "svec_dim", "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "MAX_ITERS",
]
