"""Finite V-representations of convex sets and the LP feasibility kernel.

Polytopes are stored as the convex hull of explicit points, cones as the
positive hull of generators.  Everything downstream (membership certificates,
inclusion slacks, least-norm subgradients) reduces to a handful of primitives
implemented here: a phase-1 simplex, Wolfe's min-norm-point routine, Minkowski
sums and support-function / projection based Hausdorff distances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-9
LP_TOL = 1e-8
WEIGHT_CAP = 1e6


class GeometryError(ValueError):
    pass


def _as_matrix(points, dim=None):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        if dim is None:
            raise GeometryError("cannot infer dimension from an empty point list")
        pts = pts.reshape(0, dim)
    return pts


def _sort_rows(pts):
    """Canonical deterministic ordering: by norm, then lexicographic."""
    if len(pts) <= 1:
        return pts
    with np.errstate(over="ignore", invalid="ignore"):
        keys = [tuple(row) for row in np.round(pts, 15)]
        order = sorted(range(len(pts)),
                       key=lambda i: (float(np.linalg.norm(pts[i])),) + keys[i])
    return pts[order]


def _dedup_rows(pts, tol):
    kept = []
    with np.errstate(over="ignore", invalid="ignore"):
        for row in pts:
            if all(np.linalg.norm(row - k) > tol for k in kept):
                kept.append(row)
    return np.array(kept) if kept else pts[:0]


@dataclass(frozen=True)
class VPolytope:
    """Convex hull of finitely many points (V-representation)."""

    points: np.ndarray
    tol: float = DEFAULT_TOL
    meta: dict = field(default_factory=dict, compare=False)

    @staticmethod
    def from_points(points, dim=None, tol=DEFAULT_TOL, meta=None):
        pts = _as_matrix(points, dim)
        pts = _dedup_rows(_sort_rows(pts), tol)
        return VPolytope(points=pts, tol=tol, meta=meta or {})

    @staticmethod
    def empty(dim, tol=DEFAULT_TOL):
        return VPolytope(points=np.zeros((0, dim)), tol=tol)

    @staticmethod
    def singleton(point, tol=DEFAULT_TOL):
        return VPolytope.from_points([point], tol=tol)

    @property
    def is_empty(self):
        return len(self.points) == 0

    @property
    def dim(self):
        return self.points.shape[1]

    def max_norm(self):
        if self.is_empty:
            return 0.0
        return float(np.max(np.linalg.norm(self.points, axis=1)))

    def support(self, direction):
        if self.is_empty:
            raise GeometryError("support function of an empty polytope")
        return float(np.max(self.points @ np.asarray(direction, dtype=float)))

    def contains(self, x, tol=None):
        if self.is_empty:
            return False
        return dist_to_hull(np.asarray(x, dtype=float), self.points) <= (tol or self.tol)

    def to_jsonable(self):
        return {"points": [[float(v) for v in p] for p in self.points], "tol": self.tol}


@dataclass(frozen=True)
class VCone:
    """Positive hull of finitely many generators; no generators = the zero cone."""

    generators: np.ndarray
    tol: float = DEFAULT_TOL

    @staticmethod
    def from_generators(generators, dim=None, tol=DEFAULT_TOL):
        gens = _as_matrix(generators, dim)
        unit = []
        for g in gens:
            nrm = np.linalg.norm(g)
            if nrm > tol:
                unit.append(g / nrm)
        unit = _sort_rows(np.array(unit)) if unit else gens[:0]
        # dedup up to positive scaling: generators are unit vectors here
        kept = []
        for g in unit:
            if all(float(g @ k) < 1.0 - tol for k in kept):
                kept.append(g)
        gens = np.array(kept) if kept else gens[:0]
        return VCone(generators=gens, tol=tol)

    @staticmethod
    def raw(points, dim=None, tol=DEFAULT_TOL):
        """Cone columns taken verbatim (zero vectors kept).

        Needed when the generators stand for membership targets, e.g. weights
        over an estimated subdifferential that legitimately contains 0.
        """
        return VCone(generators=_as_matrix(points, dim), tol=tol)

    @staticmethod
    def zero(dim, tol=DEFAULT_TOL):
        return VCone(generators=np.zeros((0, dim)), tol=tol)

    @property
    def is_zero(self):
        return len(self.generators) == 0

    @property
    def dim(self):
        return self.generators.shape[1]

    def to_jsonable(self):
        return {"generators": [[float(v) for v in g] for g in self.generators], "tol": self.tol}


@dataclass
class MembershipCertificate:
    """Weights reconstructing 0 from hull points, cone generators and ground normals."""

    feasible: bool
    mu: list            # per hull: array of simplex weights over its points
    nu: list            # per cone: array of nonnegative weights over its generators
    kappa: np.ndarray   # nonnegative weights over ground-set normal generators
    residual: float
    margin: float = 0.0
    near_degenerate: bool = False

    @property
    def alpha(self):
        return np.array([float(np.sum(m)) for m in self.mu])

    @property
    def beta(self):
        return np.array([float(np.sum(v)) for v in self.nu])

    def to_jsonable(self):
        return {
            "feasible": self.feasible,
            "alpha": [float(a) for a in self.alpha],
            "beta": [float(b) for b in self.beta],
            "mu": [[float(w) for w in m] for m in self.mu],
            "nu": [[float(w) for w in v] for v in self.nu],
            "kappa": [float(k) for k in self.kappa],
            "residual": self.residual,
            "margin": self.margin,
            "near_degenerate": self.near_degenerate,
        }


# ---------------------------------------------------------------------------
# phase-1 simplex (dense tableau, Bland's rule)

def _phase1_simplex(A, b, tol=1e-11, max_iter=20000):
    """Feasibility of {Ax = b, x >= 0}.  Returns (objective, x).

    Objective is the optimal sum of artificial variables (0 iff feasible up to
    round-off).  Bland's rule prevents cycling; the iteration cap is a guard
    against numerical stalling and raises rather than returning garbage.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    m, n = A.shape
    A = A.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # tableau: [A | I | b], cost row for min sum(artificials),
    # reduced against the initial all-artificial basis
    T = np.hstack([A, np.eye(m), b[:, None]])
    cost = np.concatenate([np.zeros(n), np.ones(m), [0.0]]) - T.sum(axis=0)
    basis = list(range(n, n + m))

    for _ in range(max_iter):
        enter = -1
        for j in range(n + m):
            if cost[j] < -tol:
                enter = j
                break
        if enter < 0:
            break
        ratios = []
        for r in range(m):
            if T[r, enter] > tol:
                ratios.append((T[r, -1] / T[r, enter], basis[r], r))
        if not ratios:
            raise GeometryError("phase-1 LP unbounded; inconsistent tableau")
        _, _, row = min(ratios)
        piv = T[row, enter]
        T[row] /= piv
        for r in range(m):
            if r != row and abs(T[r, enter]) > 0:
                T[r] -= T[r, enter] * T[row]
        cost = cost - cost[enter] * T[row]
        basis[row] = enter
    else:
        raise GeometryError("degenerate LP: cycling guard triggered")

    x = np.zeros(n + m)
    for r, bv in enumerate(basis):
        x[bv] = T[r, -1]
    objective = float(np.sum(x[n:]))
    return objective, x[:n]


def zero_in_sum(hulls, cones, ground, lp_tol=LP_TOL):
    """Certificate for 0 in sum(co hull_i) + sum(pos cone_j) + pos(ground).

    Hull weights live on a simplex (their total is 1); cone and ground weights
    are free nonnegative.  With no hulls the call degenerates to the pure cone
    test 0 in sum(cones) + ground with the normalization moved onto the cone
    weights, which is exactly the combination a constraint-qualification check
    needs to rule out.
    """
    hulls = list(hulls)
    cones = list(cones)
    dims = [h.dim for h in hulls] + [c.dim for c in cones]
    if ground is not None:
        dims.append(ground.dim)
    if not dims:
        raise GeometryError("zero_in_sum needs at least one set")
    n = dims[0]
    if any(d != n for d in dims):
        raise GeometryError("dimension mismatch between sets")

    pure_cone = len(hulls) == 0

    cols = []
    tags = []
    for i, h in enumerate(hulls):
        for s, p in enumerate(h.points):
            cols.append(np.concatenate([p, [1.0]]))
            tags.append(("hull", i, s))
    for j, c in enumerate(cones):
        for t, w in enumerate(c.generators):
            cols.append(np.concatenate([w, [1.0 if pure_cone else 0.0]]))
            tags.append(("cone", j, t))
    if ground is not None:
        for r, g in enumerate(ground.generators):
            cols.append(np.concatenate([g, [0.0]]))
            tags.append(("ground", 0, r))

    b = np.zeros(n + 1)
    b[-1] = 1.0

    mu = [np.zeros(len(h.points)) for h in hulls]
    nu = [np.zeros(len(c.generators)) for c in cones]
    kappa = np.zeros(0 if ground is None else len(ground.generators))

    if not cols:
        return MembershipCertificate(False, mu, nu, kappa, residual=1.0, margin=1.0)

    A = np.array(cols).T
    objective, x = _phase1_simplex(A, b)

    if objective > lp_tol / 2:
        return MembershipCertificate(False, mu, nu, kappa, residual=objective, margin=objective)

    for val, tag in zip(x, tags):
        kind, idx, sub = tag
        if kind == "hull":
            mu[idx][sub] = val
        elif kind == "cone":
            nu[idx][sub] = val
        else:
            kappa[sub] = val

    recon = np.zeros(n)
    for h, m in zip(hulls, mu):
        if len(m):
            recon += m @ h.points
    for c, v in zip(cones, nu):
        if len(v):
            recon += v @ c.generators
    if ground is not None and len(kappa):
        recon += kappa @ ground.generators
    residual = float(np.linalg.norm(recon))
    if residual > lp_tol:
        raise GeometryError(f"certificate reconstruction residual {residual:.3e} exceeds lp_tol")

    cap_hit = any(np.any(v > WEIGHT_CAP) for v in nu) or bool(np.any(kappa > WEIGHT_CAP))
    return MembershipCertificate(True, mu, nu, kappa, residual=residual,
                                 near_degenerate=cap_hit)


# ---------------------------------------------------------------------------
# min-norm point (Wolfe) and hull projections

def min_norm_point(points, tol=1e-12, max_iter=None):
    """Least-norm element of the convex hull of `points` (Wolfe's algorithm).

    Returns (x, weights) with x = weights @ points, weights on the simplex.
    Finite termination up to the iteration cap; for the tiny hulls used here
    convergence is effectively exact.
    """
    P = _as_matrix(points)
    k = len(P)
    if k == 0:
        raise GeometryError("min_norm_point of an empty set")
    scale = 1.0 + float(np.max(np.sum(P * P, axis=1)))
    stop = tol * scale

    start = int(np.argmin(np.linalg.norm(P, axis=1)))
    S = [start]
    w = np.array([1.0])
    x = P[start].astype(float)
    if max_iter is None:
        max_iter = 16 * k + 100

    for _ in range(max_iter):
        j = int(np.argmin(P @ x))
        if float(x @ x) - float(x @ P[j]) <= stop:
            break
        if j in S:
            break
        S.append(j)
        w = np.append(w, 0.0)
        for _ in range(16 * k + 16):
            Q = P[S]
            g = Q @ Q.T
            kk = len(S)
            M = np.zeros((kk + 1, kk + 1))
            M[:kk, :kk] = g
            M[:kk, kk] = 1.0
            M[kk, :kk] = 1.0
            rhs = np.zeros(kk + 1)
            rhs[kk] = 1.0
            sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
            alpha = sol[:kk]
            if np.all(alpha > 1e-14):
                w = alpha
                break
            diff = w - alpha
            with np.errstate(divide="ignore", invalid="ignore"):
                steps = np.where(diff > 1e-14, w / diff, np.inf)
            theta = float(min(1.0, np.min(steps)))
            w = (1 - theta) * w + theta * alpha
            w[w < 1e-14] = 0.0
            keep = w > 0
            if keep.all():
                w = w / w.sum()
                break
            S = [s for s, k_ in zip(S, keep) if k_]
            w = w[keep]
            w = w / w.sum()
        x = w @ P[S]

    weights = np.zeros(k)
    for s, ws in zip(S, w):
        weights[s] += ws
    return x, weights


def dist_to_hull(x, points):
    """Euclidean distance from x to the convex hull of `points`."""
    P = _as_matrix(points)
    if len(P) == 0:
        raise GeometryError("distance to an empty hull")
    y, _ = min_norm_point(P - np.asarray(x, dtype=float))
    return float(np.linalg.norm(y))


def least_norm(poly: VPolytope):
    """Least-norm element of a polytope's hull."""
    if poly.is_empty:
        raise GeometryError("least_norm of an empty polytope")
    x, _ = min_norm_point(poly.points)
    return x


# ---------------------------------------------------------------------------
# Minkowski sums and Hausdorff distances

def minkowski_sum(a: VPolytope, b: VPolytope):
    if a.dim != b.dim:
        raise GeometryError("dimension mismatch in minkowski_sum")
    if a.is_empty or b.is_empty:
        return VPolytope.empty(a.dim, tol=max(a.tol, b.tol))
    pts = (a.points[:, None, :] + b.points[None, :, :]).reshape(-1, a.dim)
    return VPolytope.from_points(pts, tol=max(a.tol, b.tol))


_dir_cache = {}


def direction_grid(n, cap=4096):
    """Deterministic quasi-uniform unit directions, 4**n of them capped at `cap`."""
    count = min(4 ** n, cap)
    return sphere_directions(n, count)


def sphere_directions(n, count):
    """Deterministic, antipodally symmetric unit directions on the sphere."""
    key = (n, count)
    if key in _dir_cache:
        return _dir_cache[key]
    if n == 1:
        dirs = np.array([[1.0] if i % 2 == 0 else [-1.0] for i in range(count)])
    elif n == 2:
        angles = [np.pi * i / count for i in range(count)]
        half = np.array([[np.cos(a), np.sin(a)] for a in angles])
        dirs = np.vstack([half, -half])[:count]
    else:
        rng = np.random.default_rng(20240311)
        half = rng.standard_normal((max(1, (count + 1) // 2), n))
        half /= np.linalg.norm(half, axis=1, keepdims=True)
        dirs = np.vstack([half, -half])[:count]
    _dir_cache[key] = dirs
    return dirs


def hausdorff_one_sided(a: VPolytope, b: VPolytope):
    """sup over co(a) of the distance to co(b); the inclusion slack of a in b."""
    if a.is_empty or b.is_empty:
        raise GeometryError("hausdorff distance needs nonempty sets")
    if a.dim != b.dim:
        raise GeometryError("dimension mismatch in hausdorff")
    # the farthest point of a polytope from a convex set is one of its vertices
    best = max(dist_to_hull(v, b.points) for v in a.points)
    # support-function lower bounds on a deterministic grid, as a cross-check
    for d in direction_grid(a.dim):
        gap = a.support(d) - b.support(d)
        if gap > best:
            best = gap
    return float(max(best, 0.0))


def hausdorff(a: VPolytope, b: VPolytope):
    """Symmetric Hausdorff distance between two hulls."""
    return max(hausdorff_one_sided(a, b), hausdorff_one_sided(b, a))
