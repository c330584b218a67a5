"""Vector-optimization layer: weak Pareto values at infinity and
solution-set certificates.

A candidate value ybar is probed through the auxiliary minimax objective
max_i (f_i - ybar_i): if ybar is a weak Pareto value then that objective is
nonnegative on the feasible set, and chasing it to 0 along an escaping
feasible sequence witnesses the value being attained only in the limit.  The
report requires BOTH the sampled nonnegativity and the escape-with-limit-0
evidence; either alone is consistent with ybar not being a weak value at all.

Constant shifts do not move gradients, so the auxiliary problem inherits every
limit set of the original -- which is why its certificate speaks for the
vector problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import descent as dsc
from . import expr as ex
from .asymptotics import SamplingPlan
from .geometry import LP_TOL, zero_in_sum
from .kkt import (CqVerdict, KktReport, _constraint_cones, _ground_cone,
                  check_cq, estimate_problem_sets, kkt_at_infinity)
from .problems import MinimaxProblem, VectorProblem


class ParetoError(ValueError):
    pass


@dataclass
class SolutionSetVerdict:
    status: str          # nonempty-compact | nonempty-bounded | inconclusive | not-applicable
    margin: float = None
    note: str = ""

    def to_jsonable(self):
        return {"status": self.status, "margin": self.margin, "note": self.note}


@dataclass
class ParetoReport:
    candidate_value: np.ndarray
    verdict: str         # consistent-weak-value | refuted | evidence-failed | not-applicable
    nonnegativity: dict = field(default_factory=dict)
    escape: dict = field(default_factory=dict)
    kkt: KktReport = None
    weak_solution_set: SolutionSetVerdict = None
    pareto_solution_set: SolutionSetVerdict = None
    refutation_witness: np.ndarray = None
    detail: str = ""

    def to_jsonable(self):
        return {
            "candidate_value": [float(v) for v in self.candidate_value],
            "verdict": self.verdict,
            "nonnegativity": dict(self.nonnegativity),
            "escape": dict(self.escape),
            "kkt": None if self.kkt is None else self.kkt.to_jsonable(),
            "weak_solution_set": None if self.weak_solution_set is None
            else self.weak_solution_set.to_jsonable(),
            "pareto_solution_set": None if self.pareto_solution_set is None
            else self.pareto_solution_set.to_jsonable(),
            "refutation_witness": None if self.refutation_witness is None
            else [float(v) for v in self.refutation_witness],
            "detail": self.detail,
        }


def build_auxiliary(vp: VectorProblem, ybar):
    """Minimax problem over max_i (f_i - ybar_i) with the same feasible set."""
    ybar = np.asarray(ybar, dtype=float).reshape(-1)
    if ybar.shape[0] != vp.m:
        raise ParetoError("candidate value length differs from the objective count")
    if not np.all(np.isfinite(ybar)):
        raise ParetoError("candidate value must be finite")
    shifted = tuple(ex.shift(f, -y) for f, y in zip(vp.objectives, ybar))
    return MinimaxProblem(objectives=shifted, constraints=vp.constraints, ground=vp.ground)


def _feasible_samples(vp, plan, cap=400):
    """Deterministic feasible probes: moderate radii plus the plan's schedule."""
    radii = [0.0, 0.5, 1.0, 2.0, 5.0] + [float(r) for r in plan.radii]
    out = []
    for d in plan.directions:
        for r in radii:
            x = vp.ground.project(r * d)
            if vp.feasible(x):
                out.append(x)
                if len(out) >= cap:
                    return out
    return out


def check_weak_value_at_infinity(vp: VectorProblem, ybar, plan: SamplingPlan = None,
                                 lp_tol=LP_TOL, seed=0, with_solution_sets=True):
    """Evidence pipeline for ybar being a weak Pareto value reached at infinity."""
    if plan is None:
        plan = SamplingPlan.default(vp.n, seed=seed)
    ybar = np.asarray(ybar, dtype=float).reshape(-1)
    aux = build_auxiliary(vp, ybar)

    cq = check_cq(aux, plan)
    if cq.status == "fails":
        return ParetoReport(candidate_value=ybar, verdict="not-applicable",
                            detail="qualification at infinity fails; the necessary "
                                   "condition is not available")

    # sampled nonnegativity of the auxiliary objective on the feasible set
    tol = 1e-7 * (1.0 + float(np.max(np.abs(ybar))))
    samples = _feasible_samples(vp, plan)
    min_val = None
    witness = None
    for x in samples:
        v = aux.phi(x)
        if min_val is None or v < min_val:
            min_val = v
        if v < -tol:
            vals = vp.values(x)
            if np.all(vals < ybar - tol / 2):
                witness = x
                break
    nonneg = {"ok": witness is None, "samples": len(samples),
              "min_value": None if min_val is None else float(min_val)}

    if witness is not None:
        return ParetoReport(candidate_value=ybar, verdict="refuted",
                            nonnegativity=nonneg, refutation_witness=witness,
                            detail="a feasible point strictly dominates the candidate value")

    # escape evidence with the auxiliary objective flattening at 0
    escape_ok = False
    esc_info = {"ok": False, "status": None, "phi_limit": None}
    evidence = None
    starts = [np.zeros(vp.n)] + [d * 1.0 for d in plan.directions[:4]]
    for i, x0 in enumerate(starts):
        traj = dsc.minimize(aux, x0, budget=600, escape_floor=plan.escape_floor,
                            seed=seed + i)
        if traj.status == "escaped":
            limit = traj.phi_limit_estimate
            esc_info = {"ok": False, "status": traj.status, "phi_limit": float(limit)}
            if abs(limit) <= 1e-3 * (1.0 + float(np.max(np.abs(ybar)))):
                escape_ok = True
                esc_info["ok"] = True
                evidence = dsc.escape_evidence(traj)
                break
        else:
            if esc_info["status"] is None:
                esc_info = {"ok": False, "status": traj.status, "phi_limit": None}

    kkt_report = kkt_at_infinity(aux, plan, lp_tol=lp_tol, escape=evidence, seed=seed)

    verdict = "consistent-weak-value" if (nonneg["ok"] and escape_ok) else "evidence-failed"
    detail = ("sampled nonnegativity and an escaping sequence with the auxiliary "
              "objective tending to 0 both hold" if verdict == "consistent-weak-value"
              else "weak-value evidence incomplete: "
                   + ("no escape with auxiliary objective tending to 0 was found"
                      if nonneg["ok"] else "nonnegativity could not be sampled"))

    report = ParetoReport(candidate_value=ybar, verdict=verdict, nonnegativity=nonneg,
                          escape=esc_info, kkt=kkt_report, detail=detail)
    if with_solution_sets:
        report.weak_solution_set = weak_solution_set_check(vp, plan, lp_tol=lp_tol)
        report.pareto_solution_set = pareto_solution_set_check(vp, plan, lp_tol=lp_tol)
    return report


def _solution_set_lp(vp: VectorProblem, plan, lp_tol):
    as_minimax = MinimaxProblem(objectives=vp.objectives, constraints=vp.constraints,
                                ground=vp.ground)
    cq = check_cq(as_minimax, plan)
    if not cq.holds:
        return cq, None
    f_sets, g_sets, ground_aset = estimate_problem_sets(as_minimax, plan)
    cert = zero_in_sum([a.bounded_part for a in f_sets], _constraint_cones(g_sets),
                       _ground_cone(ground_aset), lp_tol=lp_tol)
    return cq, cert


def weak_solution_set_check(vp: VectorProblem, plan: SamplingPlan = None,
                            lp_tol=LP_TOL, values_nonempty=True):
    """Certificate that the weak Pareto solution set is nonempty and compact.

    `values_nonempty` is a hypothesis flag: whether the weak value set is
    nonempty is assumed, not decided here.
    """
    if plan is None:
        plan = SamplingPlan.default(vp.n)
    if not values_nonempty:
        return SolutionSetVerdict(status="inconclusive",
                                  note="weak value set not assumed nonempty")
    cq, cert = _solution_set_lp(vp, plan, lp_tol)
    if cert is None:
        return SolutionSetVerdict(status="not-applicable",
                                  note=f"qualification at infinity: {cq.status}")
    if cert.feasible:
        return SolutionSetVerdict(status="inconclusive",
                                  note="0 lies in the combined limit sets")
    return SolutionSetVerdict(status="nonempty-compact", margin=float(cert.margin),
                              note="weak Pareto solution set nonempty and compact "
                                   "(certified at estimate level)")


def pareto_solution_set_check(vp: VectorProblem, plan: SamplingPlan = None,
                              lp_tol=LP_TOL, values_nonempty=True):
    """Certificate that the Pareto solution set is nonempty and bounded.

    Closedness of the Pareto solution set is NOT claimed; only boundedness and
    nonemptiness are certified.
    """
    if plan is None:
        plan = SamplingPlan.default(vp.n)
    if not values_nonempty:
        return SolutionSetVerdict(status="inconclusive",
                                  note="value set not assumed nonempty")
    cq, cert = _solution_set_lp(vp, plan, lp_tol)
    if cert is None:
        return SolutionSetVerdict(status="not-applicable",
                                  note=f"qualification at infinity: {cq.status}")
    if cert.feasible:
        return SolutionSetVerdict(status="inconclusive",
                                  note="0 lies in the combined limit sets")
    return SolutionSetVerdict(status="nonempty-bounded", margin=float(cert.margin),
                              note="Pareto solution set nonempty and bounded "
                                   "(certified at estimate level); closedness is not claimed")
