"""Constraint qualification, KKT-type certificates, and solution-set
sufficiency for minimax problems -- all read at infinity.

The necessary condition places 0 in the convex hull of the objective limit
sets plus the positive hull of the constraint limit sets plus the ground-set
normal cone; the qualification rules out reaching 0 with constraint terms
alone.  Both are LP feasibility questions over the estimated V-representations
and are answered by the same kernel, so a qualification failure comes with an
explicit violating multiplier and a certificate always reconstructs 0 within
the LP tolerance.

Verdicts are three-valued (holds / fails / hypothesis-unmet): when a standing
assumption cannot be confirmed the report says so instead of folding the
failure into a boolean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import descent as dsc
from .asymptotics import (AsymptoticsError, SamplingPlan, normal_cone_at_infinity,
                          subdiff_at_infinity, _cones_oppose)
from .geometry import LP_TOL, VCone, VPolytope, zero_in_sum
from .problems import MinimaxProblem


class KktError(ValueError):
    pass


@dataclass
class CqVerdict:
    status: str                 # holds | fails | error
    witness_beta: list = None   # violating multipliers when status == fails
    margin: float = None
    detail: str = ""

    @property
    def holds(self):
        return self.status == "holds"

    def to_jsonable(self):
        return {"status": self.status, "witness_beta": self.witness_beta,
                "margin": self.margin, "detail": self.detail}


@dataclass
class AssumptionReport:
    feasible_set_unbounded: bool = None
    objectives_lipschitz: list = field(default_factory=list)
    constraints_lipschitz: list = field(default_factory=list)
    phi_bounded_below: str = "unchecked"   # plausible | violated | unchecked
    qualification_at_infinity: bool = None
    notes: list = field(default_factory=list)

    def gate_ok(self, m):
        if self.feasible_set_unbounded is False:
            return False
        if self.phi_bounded_below == "violated":
            return False
        if self.qualification_at_infinity is False:
            return False
        # the hull inclusion behind the certificate needs the max rule, which
        # only bites when there are several objectives
        if m >= 2 and not all(self.objectives_lipschitz):
            return False
        if self.constraints_lipschitz and not all(self.constraints_lipschitz):
            return False
        return True

    def to_jsonable(self):
        return {
            "feasible_set_unbounded": self.feasible_set_unbounded,
            "objectives_lipschitz": list(self.objectives_lipschitz),
            "constraints_lipschitz": list(self.constraints_lipschitz),
            "phi_bounded_below": self.phi_bounded_below,
            "qualification_at_infinity": self.qualification_at_infinity,
            "notes": list(self.notes),
        }


@dataclass
class SufficiencyVerdict:
    status: str             # nonempty-compact | inconclusive | not-applicable | hypothesis-unmet
    margin: float = None
    cross_validation: dict = None
    detail: str = ""

    def to_jsonable(self):
        return {"status": self.status, "margin": self.margin,
                "cross_validation": self.cross_validation, "detail": self.detail}


@dataclass
class KktReport:
    verdict: str            # feasible | infeasible | hypothesis-unmet
    cq: CqVerdict
    certificate: object = None
    certificate_reliable: bool = False
    sufficiency: SufficiencyVerdict = None
    assumptions: AssumptionReport = None
    objective_sets: list = field(default_factory=list)
    constraint_sets: list = field(default_factory=list)
    ground_set: object = None
    escape_evidence: object = None
    detail: str = ""

    @property
    def feasible(self):
        return self.verdict == "feasible"

    @property
    def alpha(self):
        return None if self.certificate is None else self.certificate.alpha

    @property
    def beta(self):
        return None if self.certificate is None else self.certificate.beta

    def to_jsonable(self):
        return {
            "verdict": self.verdict,
            "cq": self.cq.to_jsonable(),
            "certificate": None if self.certificate is None else self.certificate.to_jsonable(),
            "certificate_reliable": self.certificate_reliable,
            "sufficiency": None if self.sufficiency is None else self.sufficiency.to_jsonable(),
            "assumptions": None if self.assumptions is None else self.assumptions.to_jsonable(),
            "objective_sets": [a.to_jsonable() for a in self.objective_sets],
            "constraint_sets": [a.to_jsonable() for a in self.constraint_sets],
            "ground_set": None if self.ground_set is None else self.ground_set.to_jsonable(),
            "escape_evidence": None if self.escape_evidence is None
            else self.escape_evidence.to_jsonable(),
            "detail": self.detail,
        }


# ---------------------------------------------------------------------------
# estimation helpers

def estimate_problem_sets(p: MinimaxProblem, plan: SamplingPlan):
    """Limit sets of every objective and constraint plus the ground normal cone."""
    f_sets = [subdiff_at_infinity(f, plan) for f in p.objectives]
    g_sets = [subdiff_at_infinity(g, plan) for g in p.constraints]
    ground = normal_cone_at_infinity(p.ground, plan)
    return f_sets, g_sets, ground


def _ground_cone(ground_aset):
    return ground_aset.recession_cone


def _constraint_cones(g_sets):
    """Cone columns over each estimated constraint limit set.

    The columns are the raw estimated points: a constraint whose limit set is
    exactly {0} must still offer a column, otherwise a real qualification
    failure (beta on a zero gradient) would be invisible.
    """
    cones = []
    for a in g_sets:
        pts = a.bounded_part.points
        dim = a.bounded_part.dim
        cones.append(VCone.raw(pts, dim=dim) if len(pts) else VCone.zero(dim))
    return cones


def verify_assumptions(p: MinimaxProblem, plan: SamplingPlan, f_sets, g_sets,
                       ground_aset, phi_aset, check_boundedness=True, seed=0):
    rep = AssumptionReport()
    rep.objectives_lipschitz = [bool(a.lipschitz_at_infinity) for a in f_sets]
    rep.constraints_lipschitz = [bool(a.lipschitz_at_infinity) for a in g_sets]

    # unbounded feasible set: a far sample in the ground set satisfying g <= 0
    found = False
    for d in plan.directions:
        for r in plan.radii[-3:]:
            x = p.ground.project(r * d)
            if float(np.linalg.norm(x)) < plan.escape_floor:
                continue
            slack = 1e-6 * (1.0 + float(np.linalg.norm(x)))
            try:
                ok = all(_safe_eval(g, x) <= slack for g in p.constraints)
            except Exception:
                continue
            if ok:
                found = True
                break
        if found:
            break
    rep.feasible_set_unbounded = found
    if not found:
        rep.notes.append("no feasible sample beyond the escape floor")

    rep.qualification_at_infinity = not _cones_oppose(phi_aset.recession_cone,
                                                      _ground_cone(ground_aset))
    if not rep.qualification_at_infinity:
        rep.notes.append("horizon directions of the objective oppose ground normals")

    if check_boundedness:
        start = np.zeros(p.n)
        traj = dsc.minimize(p, start, budget=300, escape_floor=plan.escape_floor, seed=seed)
        if traj.status == "unbounded-below":
            rep.phi_bounded_below = "violated"
            rep.notes.append("descending record passed -1e12")
        else:
            rep.phi_bounded_below = "plausible"
    return rep


def _safe_eval(e, x):
    from . import expr as ex

    return ex.evaluate(e, x)


# ---------------------------------------------------------------------------
# operations

def check_cq(p: MinimaxProblem, plan: SamplingPlan = None, g_sets=None,
             ground_aset=None, lp_tol=LP_TOL):
    """Qualification at infinity: constraint terms alone cannot reach 0.

    The test normalizes the constraint weights, so LP feasibility means a
    violating multiplier exists and the qualification FAILS.
    """
    if plan is None:
        plan = SamplingPlan.default(p.n)
    if p.p == 0:
        return CqVerdict(status="holds", detail="no constraints: qualification is vacuous")
    try:
        if g_sets is None:
            g_sets = [subdiff_at_infinity(g, plan) for g in p.constraints]
        if ground_aset is None:
            ground_aset = normal_cone_at_infinity(p.ground, plan)
    except AsymptoticsError as err:
        return CqVerdict(status="error", detail=f"estimation failed: {err}")

    cert = zero_in_sum([], _constraint_cones(g_sets), _ground_cone(ground_aset), lp_tol=lp_tol)
    if cert.feasible:
        beta = cert.beta
        total = float(np.sum(beta))
        beta = beta / total if total > 0 else beta
        return CqVerdict(status="fails", witness_beta=[float(b) for b in beta],
                         margin=0.0, detail="nontrivial nonnegative combination reaches 0")
    return CqVerdict(status="holds", margin=float(cert.margin))


def kkt_at_infinity(p: MinimaxProblem, plan: SamplingPlan = None, lp_tol=LP_TOL,
                    verify=True, assume_standing=False, with_sufficiency=True,
                    escape=None, seed=0):
    """Full analysis: estimates, qualification, certificate, sufficiency.

    `escape` may carry descent evidence (an EscapeEvidence) to embed in the
    report; producing it is the caller's business since no algorithm decides
    escape in general.
    """
    if plan is None:
        plan = SamplingPlan.default(p.n, seed=seed)

    try:
        f_sets, g_sets, ground_aset = estimate_problem_sets(p, plan)
        phi_aset = subdiff_at_infinity(p.phi_expr(), plan)
    except AsymptoticsError as err:
        report = KktReport(verdict="hypothesis-unmet",
                           cq=CqVerdict(status="error", detail=str(err)),
                           detail=f"estimation failed: {err}")
        return report

    cq = check_cq(p, plan, g_sets=g_sets, ground_aset=ground_aset, lp_tol=lp_tol)

    assumptions = None
    gate_ok = True
    if verify and not assume_standing:
        assumptions = verify_assumptions(p, plan, f_sets, g_sets, ground_aset,
                                         phi_aset, seed=seed)
        gate_ok = assumptions.gate_ok(p.m)

    hulls = [a.bounded_part for a in f_sets]
    cones = _constraint_cones(g_sets)
    cert = zero_in_sum(hulls, cones, _ground_cone(ground_aset), lp_tol=lp_tol)

    if not gate_ok:
        verdict = "hypothesis-unmet"
        detail = "standing assumptions could not be confirmed; LP outcome is informational"
    elif cert.feasible:
        verdict = "feasible"
        detail = "multipliers place 0 in the combined limit sets"
    else:
        verdict = "infeasible"
        detail = ("necessary condition violated at estimate level: "
                  "no minimizing sequence escapes to infinity")

    report = KktReport(verdict=verdict, cq=cq, certificate=cert,
                       certificate_reliable=bool(cert.feasible and cq.holds and gate_ok),
                       assumptions=assumptions, objective_sets=f_sets,
                       constraint_sets=g_sets, ground_set=ground_aset,
                       escape_evidence=escape, detail=detail)

    if with_sufficiency:
        report.sufficiency = sufficiency_check(
            p, plan, lp_tol=lp_tol, cq=cq, precomputed=(f_sets, g_sets, ground_aset),
            assumptions=assumptions, seed=seed)
    return report


def sufficiency_check(p: MinimaxProblem, plan: SamplingPlan = None, lp_tol=LP_TOL,
                      cq=None, precomputed=None, assumptions=None,
                      cross_validate=True, n_starts=8, seed=0):
    """Solution-set certificate: an infeasible combined sum at infinity means
    minimizing sequences cannot escape, so the solution set is nonempty and
    compact (at estimate level)."""
    if plan is None:
        plan = SamplingPlan.default(p.n, seed=seed)
    if cq is None:
        cq = check_cq(p, plan)
    if not cq.holds:
        return SufficiencyVerdict(status="not-applicable",
                                  detail="qualification at infinity does not hold")
    if assumptions is not None and assumptions.phi_bounded_below == "violated":
        return SufficiencyVerdict(status="hypothesis-unmet",
                                  detail="objective appears unbounded below")
    if assumptions is not None and assumptions.qualification_at_infinity is False:
        return SufficiencyVerdict(status="hypothesis-unmet",
                                  detail="horizon qualification fails in estimate")

    if precomputed is None:
        f_sets, g_sets, ground_aset = estimate_problem_sets(p, plan)
    else:
        f_sets, g_sets, ground_aset = precomputed

    hulls = [a.bounded_part for a in f_sets]
    cones = _constraint_cones(g_sets)
    cert = zero_in_sum(hulls, cones, _ground_cone(ground_aset), lp_tol=lp_tol)
    if cert.feasible:
        return SufficiencyVerdict(status="inconclusive", margin=0.0,
                                  detail="0 lies in the combined limit sets; "
                                         "the sufficient condition is silent")

    verdict = SufficiencyVerdict(status="nonempty-compact", margin=float(cert.margin),
                                 detail="solution set nonempty and compact "
                                        "(certified at estimate level)")
    if cross_validate:
        from .geometry import sphere_directions

        runs = []
        all_ok = True
        for i, d in enumerate(sphere_directions(p.n, max(n_starts, 2))[:n_starts]):
            x0 = (2.0 + i) * d
            traj = dsc.minimize(p, x0, budget=600, escape_floor=plan.escape_floor,
                                seed=seed + i)
            bounded = all(float(np.linalg.norm(x)) < plan.escape_floor
                          for x, _ in traj.iterates)
            runs.append({"start": [float(v) for v in x0],
                         "status": traj.status,
                         "x_final": [float(v) for v in traj.x_final],
                         "phi_final": float(traj.phi_final),
                         "bounded": bounded})
            all_ok = all_ok and bounded and traj.status == "converged"
        verdict.cross_validation = {"all_converged_bounded": all_ok, "runs": runs}
    return verdict
