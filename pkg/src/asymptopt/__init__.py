"""asymptopt: optimality certificates at infinity for nonsmooth minimax
and vector optimization problems.

The package estimates generalized gradients and normal cones along points
escaping to infinity, checks the qualification and KKT-type conditions built
from them, hunts for minimizing sequences that escape, and certifies
nonemptiness/compactness of solution sets, including the vector case.
"""

__version__ = "0.1.0"

from .expr import (ActiveProfile, DomainError, Expr, ExprError, ParseError,
                   active_profile, evaluate, grad_smooth, parse)
from .geometry import (GeometryError, MembershipCertificate, VCone, VPolytope,
                       hausdorff, hausdorff_one_sided, least_norm,
                       min_norm_point, minkowski_sum, zero_in_sum)
from .subdiff import GroundSet, SubdiffError, normal_cone_at, subdiff_at
from .problems import MinimaxProblem, ProblemError, VectorProblem
from .asymptotics import (AsymptoticSet, AsymptoticsError, InclusionReport,
                          SamplingPlan, check_sum_rule, max_rule_at_infinity,
                          normal_cone_at_infinity, subdiff_at_infinity)
from .descent import (EkelandCertificationError, EkelandWitness, EscapeEvidence,
                      Trajectory, ekeland_witness, escape_evidence, minimize)
from .kkt import (AssumptionReport, CqVerdict, KktReport, SufficiencyVerdict,
                  check_cq, kkt_at_infinity, sufficiency_check)
from .pareto import (ParetoReport, SolutionSetVerdict, build_auxiliary,
                     check_weak_value_at_infinity, pareto_solution_set_check,
                     weak_solution_set_check)

__all__ = [
    "__version__",
    "ActiveProfile", "DomainError", "Expr", "ExprError", "ParseError",
    "active_profile", "evaluate", "grad_smooth", "parse",
    "GeometryError", "MembershipCertificate", "VCone", "VPolytope",
    "hausdorff", "hausdorff_one_sided", "least_norm", "min_norm_point",
    "minkowski_sum", "zero_in_sum",
    "GroundSet", "SubdiffError", "normal_cone_at", "subdiff_at",
    "MinimaxProblem", "ProblemError", "VectorProblem",
    "AsymptoticSet", "AsymptoticsError", "InclusionReport", "SamplingPlan",
    "check_sum_rule", "max_rule_at_infinity", "normal_cone_at_infinity",
    "subdiff_at_infinity",
    "EkelandCertificationError", "EkelandWitness", "EscapeEvidence",
    "Trajectory", "ekeland_witness", "escape_evidence", "minimize",
    "AssumptionReport", "CqVerdict", "KktReport", "SufficiencyVerdict",
    "check_cq", "kkt_at_infinity", "sufficiency_check",
    "ParetoReport", "SolutionSetVerdict", "build_auxiliary",
    "check_weak_value_at_infinity", "pareto_solution_set_check",
    "weak_solution_set_check",
]
