"""Subdifferentials and normal cones at finite points.

For a max-of-smooth expression the generalized gradient at a point is the
convex hull of the gradients of the branches that achieve the max (within the
activity tolerance).  That hull is exact when the active branch gradients are
distinct; coinciding gradients may make it a proper superset, which is flagged
in the polytope metadata rather than silently accepted.

Ground sets are restricted to the shapes the analyzer actually meets: the
whole space, boxes with infinite ends, and H-polyhedra {Ax <= b}.  For these
(convex) sets the limiting normal cone equals the positive hull of the active
outward face normals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import DomainError, Expr, ExprError, MAX_ACTIVE_SELECTIONS, active_profile, grad_smooth
from .geometry import VCone, VPolytope

ROW_ACTIVE_TOL = 1e-8   # relative activity tolerance for polyhedron rows
MEMBER_TOL = 1e-9       # relative membership tolerance for ground sets


class SubdiffError(ValueError):
    pass


def subdiff_at(e: Expr, x):
    """Hull of active-branch gradients of a max-of-smooth expression at x."""
    profile = active_profile(e, x)
    count = profile.selection_count()
    if count > MAX_ACTIVE_SELECTIONS:
        raise SubdiffError(
            f"{count} simultaneously active branches exceed the cap of {MAX_ACTIVE_SELECTIONS}"
        )
    grads = []
    for choice in profile.smooth_selections():
        g = grad_smooth(e, x, choice)
        if not np.all(np.isfinite(g)):
            raise DomainError("non-finite branch gradient", kind="overflow")
        grads.append(g)
    G = np.array(grads)
    # max-abs scale: squaring giant-but-finite gradients would overflow
    scale = 1.0 + float(np.max(np.abs(G)))
    tol = 1e-9 * scale
    poly = VPolytope.from_points(G, tol=tol)
    degenerate = len(poly.points) < len(G)
    return VPolytope(points=poly.points, tol=tol,
                     meta={"selections": len(G), "possibly_superset": degenerate})


# ---------------------------------------------------------------------------
# ground sets

@dataclass(frozen=True)
class GroundSet:
    """Closed set the minimization is restricted to: full space, box, or {Ax <= b}."""

    kind: str
    dim: int
    lower: np.ndarray = None
    upper: np.ndarray = None
    A: np.ndarray = None
    b: np.ndarray = None

    @staticmethod
    def full_space(dim):
        return GroundSet(kind="full", dim=dim)

    @staticmethod
    def box(lower, upper):
        lo = np.asarray(lower, dtype=float).reshape(-1)
        hi = np.asarray(upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise SubdiffError("box bounds differ in length")
        if np.any(lo > hi):
            raise SubdiffError("box has lower > upper in some coordinate")
        return GroundSet(kind="box", dim=lo.shape[0], lower=lo, upper=hi)

    @staticmethod
    def polyhedron(A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise SubdiffError("polyhedron A and b differ in row count")
        if np.any(np.linalg.norm(A, axis=1) == 0):
            raise SubdiffError("polyhedron has a zero row")
        return GroundSet(kind="polyhedron", dim=A.shape[1], A=A, b=b)

    def contains(self, x, tol=MEMBER_TOL):
        x = np.asarray(x, dtype=float).reshape(-1)
        if self.kind == "full":
            return True
        if self.kind == "box":
            slack = tol * (1.0 + np.abs(x))
            return bool(np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack))
        resid = self.A @ x - self.b
        return bool(np.all(resid <= tol * (1.0 + np.abs(self.b)) * (1.0 + np.linalg.norm(x))))

    def project(self, x):
        """Euclidean projection (cyclic Dykstra for polyhedra)."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if self.kind == "full":
            return x
        if self.kind == "box":
            return np.clip(x, self.lower, self.upper)
        y = x.copy()
        p = self.A.shape[0]
        corrections = np.zeros((p, self.dim))
        norms2 = np.sum(self.A * self.A, axis=1)
        for _ in range(500):
            moved = 0.0
            for i in range(p):
                z = y + corrections[i]
                viol = float(self.A[i] @ z - self.b[i])
                if viol > 0:
                    step = viol / norms2[i] * self.A[i]
                    y_new = z - step
                else:
                    y_new = z
                corrections[i] = z - y_new
                moved = max(moved, float(np.linalg.norm(y - y_new)))
                y = y_new
            if self.contains(y) and moved < 1e-13 * (1.0 + np.linalg.norm(y)):
                break
        return y

    def unbounded(self):
        """Whether the set can contain points of arbitrarily large norm."""
        if self.kind == "full":
            return True
        if self.kind == "box":
            return bool(np.any(np.isinf(self.lower)) or np.any(np.isinf(self.upper)))
        # heuristic for polyhedra: some scaled probe direction stays feasible
        from .geometry import sphere_directions

        for d in sphere_directions(self.dim, max(2 * self.dim, 16)):
            if self.contains(self.project(1e6 * d)) and np.linalg.norm(self.project(1e6 * d)) > 1e4:
                return True
        return False

    def normal_generators_at(self, x):
        """Outward normals of the active faces (unit vectors); empty = zero cone."""
        x = np.asarray(x, dtype=float).reshape(-1)
        gens = []
        if self.kind == "full":
            return gens
        if self.kind == "box":
            for i in range(self.dim):
                tol = MEMBER_TOL * (1.0 + abs(x[i]))
                if math.isfinite(self.lower[i]) and abs(x[i] - self.lower[i]) <= tol + MEMBER_TOL * (1 + abs(self.lower[i])):
                    e = np.zeros(self.dim)
                    e[i] = -1.0
                    gens.append(e)
                if math.isfinite(self.upper[i]) and abs(x[i] - self.upper[i]) <= tol + MEMBER_TOL * (1 + abs(self.upper[i])):
                    e = np.zeros(self.dim)
                    e[i] = 1.0
                    gens.append(e)
            return gens
        for i in range(self.A.shape[0]):
            if abs(float(self.A[i] @ x - self.b[i])) <= ROW_ACTIVE_TOL * (1.0 + abs(self.b[i])):
                gens.append(self.A[i] / np.linalg.norm(self.A[i]))
        return gens

    def to_jsonable(self):
        if self.kind == "full":
            return {"kind": "full"}
        if self.kind == "box":
            enc = lambda v: ("-inf" if v == -math.inf else "inf" if v == math.inf else float(v))
            return {"kind": "box",
                    "lower": [enc(v) for v in self.lower],
                    "upper": [enc(v) for v in self.upper]}
        return {"kind": "polyhedron",
                "A": [[float(v) for v in row] for row in self.A],
                "b": [float(v) for v in self.b]}


def normal_cone_at(omega: GroundSet, x):
    """Limiting normal cone to omega at a member point, as a V-cone."""
    if not omega.contains(x):
        raise SubdiffError("point is not in the ground set")
    gens = omega.normal_generators_at(x)
    if not gens:
        return VCone.zero(omega.dim)
    return VCone.from_generators(gens, dim=omega.dim)
