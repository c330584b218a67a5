"""Subdifferentials and normal cones at infinity as sampled outer limits.

The outer limit of the generalized gradients along ||x|| -> infinity is
approximated by walking rays: a deterministic fan of unit directions, a
geometric radius schedule, and for each base ray a jittered twin that perturbs
the direction at every radius step.  Subgradient samples whose norms keep
growing geometrically are read as horizon (singular) directions after
rescaling to the unit sphere; the rest feed a clustering pass whose
representatives estimate the bounded part of the limit set.

Straight and jittered rays cannot see every escape path (curved ones may be
missed); the per-direction diagnostics report convergence of what was sampled
and nothing more.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .expr import DomainError, Expr
from .geometry import (VCone, VPolytope, hausdorff_one_sided, minkowski_sum,
                       sphere_directions)
from .subdiff import GroundSet, subdiff_at

DIVERGENCE_WINDOW = 5


class AsymptoticsError(ValueError):
    pass


@dataclass(frozen=True)
class SamplingPlan:
    """Directions, radius schedule and tolerances for far-field sampling."""

    directions: np.ndarray
    radii: np.ndarray
    seed: int = 0
    cluster_tol: float = 1e-6     # relative: scaled by (1 + max sample norm)
    escape_floor: float = 1e3
    jitter: float = 0.05
    ratio: float = 2.0

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        radii = np.asarray(self.radii, dtype=float)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "radii", radii)
        n = dirs.shape[1]
        if dirs.shape[0] < 2 * n:
            raise AsymptoticsError("need at least 2n sampling directions")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise AsymptoticsError("directions must be unit vectors")
        if len(radii) < 9:
            raise AsymptoticsError("radius schedule needs at least 9 entries")
        if np.any(np.diff(radii) <= 0):
            raise AsymptoticsError("radii must be strictly increasing")
        if self.ratio <= 1.0:
            raise AsymptoticsError("radius ratio must exceed 1")

    @staticmethod
    def default(dim, seed=0, n_directions=None, radii_base=10.0, radii_ratio=2.0,
                radii_steps=20, cluster_tol=1e-6, escape_floor=1e3, jitter=0.05):
        count = n_directions or max(2 * dim, 16)
        dirs = sphere_directions(dim, count)
        radii = radii_base * radii_ratio ** np.arange(radii_steps + 1)
        return SamplingPlan(directions=dirs, radii=radii, seed=seed,
                            cluster_tol=cluster_tol, escape_floor=escape_floor,
                            jitter=jitter, ratio=radii_ratio)

    @property
    def dim(self):
        return self.directions.shape[1]

    def tail_start(self):
        return len(self.radii) // 2

    def ray_points(self, index, jittered):
        """Sample points along one ray; the jittered twin reseeds per step."""
        d = self.directions[index]
        if not jittered or self.jitter == 0.0:
            return [r * d for r in self.radii]
        rng = np.random.default_rng([self.seed, index, 1])
        pts = []
        for r in self.radii:
            dd = d + self.jitter * rng.standard_normal(d.shape[0])
            nrm = np.linalg.norm(dd)
            dd = d if nrm == 0 else dd / nrm
            pts.append(r * dd)
        return pts

    def to_jsonable(self):
        return {
            "directions": [[float(v) for v in d] for d in self.directions],
            "radii": [float(r) for r in self.radii],
            "seed": self.seed,
            "cluster_tol": self.cluster_tol,
            "escape_floor": self.escape_floor,
            "jitter": self.jitter,
            "ratio": self.ratio,
        }


@dataclass(frozen=True)
class AsymptoticSet:
    """Estimated limit set: bounded part, horizon cone and sampling verdicts."""

    bounded_part: VPolytope
    recession_cone: VCone
    lipschitz_at_infinity: bool = None
    lipschitz_constant: float = None
    lipschitz_radius: float = None
    samples_used: int = 0
    diagnostics: tuple = ()

    @property
    def dim(self):
        return self.bounded_part.dim

    def to_jsonable(self):
        return {
            "bounded_part": self.bounded_part.to_jsonable(),
            "recession_cone": self.recession_cone.to_jsonable(),
            "lipschitz_at_infinity": self.lipschitz_at_infinity,
            "lipschitz_constant": self.lipschitz_constant,
            "lipschitz_radius": self.lipschitz_radius,
            "samples_used": self.samples_used,
            "diagnostics": list(self.diagnostics),
        }


def _safe_norm(v):
    """Euclidean norm that survives components near the double-range ceiling."""
    m = float(np.max(np.abs(v))) if len(v) else 0.0
    if m == 0.0 or not math.isfinite(m):
        return m
    return m * float(np.linalg.norm(np.asarray(v, dtype=float) / m))


def _safe_unit(v):
    m = float(np.max(np.abs(v)))
    if m == 0.0 or not math.isfinite(m):
        return None
    u = np.asarray(v, dtype=float) / m
    return u / float(np.linalg.norm(u))


def _cluster(samples, tol):
    """Greedy clustering; representatives are the latest-radius members.

    `samples` is a list of (radius_index, vector).  Deterministic: sorted by
    descending radius index, then by norm and coordinates.
    """
    order = sorted(samples, key=lambda s: (-s[0], float(np.linalg.norm(s[1])), tuple(s[1])))
    reps = []
    for _, u in order:
        if all(np.linalg.norm(u - r) > tol for r in reps):
            reps.append(u)
    return reps


def _ray_subdiff_samples(e, pts):
    """(k, vertices) per radius step; None marks a failed sample."""
    out = []
    for k, x in enumerate(pts):
        try:
            poly = subdiff_at(e, x)
            out.append((k, poly.points))
        except DomainError as err:
            out.append((k, err.kind))
        except ex.ExprError:
            out.append((k, "domain"))
    return out


def _analyze_ray(samples, ratio):
    """Split one ray's samples into divergence evidence and bounded tail data."""
    valid = [(k, pts) for k, pts in samples if not isinstance(pts, str)]
    overflow_tail = any(isinstance(pts, str) and pts == "overflow" for _, pts in samples)
    if not valid:
        return {"divergent": False, "valid": 0, "max_norms": {}, "last": None,
                "vertices": {}, "overflow": overflow_tail}
    max_norms = {}
    vertices = {}
    for k, pts in valid:
        max_norms[k] = max((_safe_norm(v) for v in pts), default=0.0)
        vertices[k] = pts
    ks = sorted(max_norms)
    growth = math.sqrt(ratio) * 0.98
    # geometric growth must persist through the last usable samples
    tail_run = 0
    for a, b in zip(ks, ks[1:]):
        if b == a + 1 and max_norms[a] > 0 and max_norms[b] >= growth * max_norms[a]:
            tail_run += 1
        else:
            tail_run = 0
    divergent = tail_run >= DIVERGENCE_WINDOW - 1
    if overflow_tail and tail_run >= 2:
        divergent = True
    last_k = ks[-1]
    return {"divergent": divergent, "valid": len(valid), "max_norms": max_norms,
            "last": last_k, "vertices": vertices, "overflow": overflow_tail}


def subdiff_at_infinity(e: Expr, plan: SamplingPlan = None):
    """Estimate the generalized gradient of e at infinity along the plan's rays."""
    if plan is None:
        plan = SamplingPlan.default(e.dim)
    if plan.dim != e.dim:
        raise AsymptoticsError("plan dimension differs from the expression")
    tail_start = plan.tail_start()

    pool = []
    recession_dirs = []
    diagnostics = []
    samples_used = 0
    any_valid = False

    for di in range(plan.directions.shape[0]):
        for jittered in (False, True):
            pts = plan.ray_points(di, jittered)
            samples = _ray_subdiff_samples(e, pts)
            info = _analyze_ray(samples, plan.ratio)
            samples_used += info["valid"]
            any_valid = any_valid or info["valid"] > 0
            if info["divergent"]:
                k = info["last"]
                verts = info["vertices"][k]
                norms = [_safe_norm(v) for v in verts]
                unit = _safe_unit(verts[int(np.argmax(norms))])
                if unit is not None:
                    recession_dirs.append((k, unit))
            else:
                for k, verts in info["vertices"].items():
                    if k >= tail_start:
                        for v in verts:
                            pool.append((k, v))
            converged = None
            ks = sorted(info["vertices"])
            if len(ks) >= 2 and not info["divergent"]:
                a = VPolytope.from_points(info["vertices"][ks[-2]])
                b = VPolytope.from_points(info["vertices"][ks[-1]])
                gap = max(hausdorff_one_sided(a, b), hausdorff_one_sided(b, a))
                scale = 1.0 + max(info["max_norms"].values())
                converged = bool(gap <= 10 * plan.cluster_tol * scale)
            diagnostics.append({
                "direction": di,
                "jittered": jittered,
                "valid_samples": info["valid"],
                "divergent": info["divergent"],
                "overflow": info["overflow"],
                "converged": converged,
            })

    if not any_valid:
        raise AsymptoticsError("all sampling directions failed to evaluate")

    n = e.dim
    if pool:
        scale = 1.0 + max(float(np.linalg.norm(u)) for _, u in pool)
        tol = plan.cluster_tol * scale
        reps = _cluster(pool, tol)
        bounded = VPolytope.from_points(np.array(reps), tol=tol)
    else:
        bounded = VPolytope.empty(n)

    cone = VCone.from_generators([u for _, u in recession_dirs], dim=n) \
        if recession_dirs else VCone.zero(n)

    lipschitz = cone.is_zero and not bounded.is_empty
    L = bounded.max_norm() if lipschitz else None
    R = float(plan.radii[tail_start]) if lipschitz else None

    return AsymptoticSet(bounded_part=bounded, recession_cone=cone,
                         lipschitz_at_infinity=lipschitz, lipschitz_constant=L,
                         lipschitz_radius=R, samples_used=samples_used,
                         diagnostics=tuple(diagnostics))


def normal_cone_at_infinity(omega: GroundSet, plan: SamplingPlan = None):
    """Estimate the normal cone to omega along members escaping to infinity."""
    if plan is None:
        plan = SamplingPlan.default(omega.dim)
    if plan.dim != omega.dim:
        raise AsymptoticsError("plan dimension differs from the ground set")

    pool = []
    diagnostics = []
    used = 0
    far_samples = 0
    for di in range(plan.directions.shape[0]):
        for jittered in (False, True):
            count = 0
            for k, x in enumerate(plan.ray_points(di, jittered)):
                y = omega.project(x)
                if float(np.linalg.norm(y)) < plan.escape_floor:
                    continue
                far_samples += 1
                for g in omega.normal_generators_at(y):
                    pool.append((k, np.asarray(g, dtype=float)))
                    count += 1
            used += count
            diagnostics.append({"direction": di, "jittered": jittered,
                                "generators": count})

    if far_samples == 0:
        raise AsymptoticsError("the ground set appears bounded: no members beyond the escape floor")

    n = omega.dim
    if pool:
        tol = plan.cluster_tol * 2.0
        reps = _cluster(pool, tol)
        cone = VCone.from_generators(np.array(reps), dim=n)
    else:
        cone = VCone.zero(n)

    return AsymptoticSet(bounded_part=VPolytope.singleton(np.zeros(n)),
                         recession_cone=cone, lipschitz_at_infinity=None,
                         samples_used=used, diagnostics=tuple(diagnostics))


# ---------------------------------------------------------------------------
# calculus-rule checks

@dataclass(frozen=True)
class InclusionReport:
    status: str          # holds | violated | inconclusive | hypothesis-unmet
    violation: float
    details: dict = field(default_factory=dict, compare=False)

    def to_jsonable(self):
        return {"status": self.status, "violation": self.violation,
                "details": {k: v for k, v in self.details.items() if not hasattr(v, "to_jsonable")}}


def _cones_oppose(c1: VCone, c2: VCone, tol=1e-6):
    for u in c1.generators:
        for v in c2.generators:
            if float(u @ v) <= -(1.0 - tol):
                return True
    return False


def check_sum_rule(e1: Expr, e2: Expr, plan: SamplingPlan = None, eps_h=1e-3):
    """Estimate-level check of d(e1+e2)(inf) inside d(e1)(inf) + d(e2)(inf)."""
    if plan is None:
        plan = SamplingPlan.default(e1.dim)
    a1 = subdiff_at_infinity(e1, plan)
    a2 = subdiff_at_infinity(e2, plan)
    a12 = subdiff_at_infinity(ex.add(e1, e2), plan)

    if _cones_oppose(a1.recession_cone, a2.recession_cone):
        return InclusionReport(status="inconclusive", violation=math.nan,
                               details={"reason": "qualification fails: opposing horizon directions"})
    if a12.bounded_part.is_empty:
        return InclusionReport(status="holds", violation=0.0,
                               details={"reason": "left side estimate is empty"})
    if a1.bounded_part.is_empty or a2.bounded_part.is_empty:
        return InclusionReport(status="violated", violation=math.inf,
                               details={"reason": "right side estimate is empty"})
    rhs = minkowski_sum(a1.bounded_part, a2.bounded_part)
    violation = hausdorff_one_sided(a12.bounded_part, rhs)
    status = "holds" if violation <= eps_h else "violated"
    return InclusionReport(status=status, violation=float(violation),
                           details={"eps_h": eps_h})


def max_rule_at_infinity(exprs, plan: SamplingPlan = None, eps_h=1e-3):
    """Estimate-level check of the pointwise-max rule at infinity.

    The hull inclusion needs every member Lipschitz at infinity; a failed
    member downgrades the report to hypothesis-unmet instead of guessing.
    """
    exprs = list(exprs)
    if not exprs:
        raise AsymptoticsError("max_rule_at_infinity needs at least one expression")
    if plan is None:
        plan = SamplingPlan.default(exprs[0].dim)
    parts = [subdiff_at_infinity(e, plan) for e in exprs]
    not_lipschitz = [i for i, a in enumerate(parts) if not a.lipschitz_at_infinity]
    if not_lipschitz:
        return InclusionReport(status="hypothesis-unmet", violation=math.nan,
                               details={"not_lipschitz_at_infinity": not_lipschitz})

    amax = subdiff_at_infinity(ex.max_of(exprs), plan)
    union = VPolytope.from_points(
        np.vstack([a.bounded_part.points for a in parts]),
        tol=max(a.bounded_part.tol for a in parts),
    )
    if amax.bounded_part.is_empty:
        return InclusionReport(status="violated", violation=math.inf,
                               details={"reason": "max estimate is empty"})
    violation = hausdorff_one_sided(amax.bounded_part, union)
    singular_trivial = amax.recession_cone.is_zero
    status = "holds" if (violation <= eps_h and singular_trivial) else "violated"
    return InclusionReport(status=status, violation=float(violation),
                           details={"eps_h": eps_h,
                                    "singular_trivial": singular_trivial})
