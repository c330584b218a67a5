"""Minimizing sequences for max-objectives: descent, escape detection,
and approximate-stationarity witnesses.

The driver is a monotone subgradient method: the step direction is the
negated least-norm element of the active-branch hull, the step length is an
adaptive base that doubles on accepted moves and halves on rejected ones, and
a move is accepted only if it does not increase the (penalized) objective.
Doubling is what lets trajectories actually reach the far field when the
infimum is unattained; a harmonic step schedule cannot leave any bounded ball
in realistic budgets.

Escape is never declared from divergence alone.  The tail must sit beyond the
escape floor with nondecreasing norms, the objective must have flattened, and
at least one witness point must carry a subgradient of norm below 1e-3 -- the
numerical residue of the variational argument that turns an escaping
minimizing sequence into a certificate at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .expr import DomainError, Expr
from .geometry import least_norm
from .problems import MinimaxProblem
from .subdiff import subdiff_at

LP_TOL = 1e-8
PENALTY_START = 10.0
PENALTY_CAP = 1e9
PLATEAU_BUDGET = 20
WITNESS_U_TOL = 1e-3


class DescentError(ValueError):
    pass


class PenaltyOverflowError(DescentError):
    pass


class EkelandCertificationError(DescentError):
    """A sampled point violated the perturbed-minimality inequality."""

    def __init__(self, message, violator):
        super().__init__(message)
        self.violator = np.asarray(violator, dtype=float)


@dataclass
class EkelandWitness:
    x: np.ndarray
    eps: float
    lam: float
    u: np.ndarray
    u_norm: float
    checks: dict = field(default_factory=dict)

    def to_jsonable(self):
        return {
            "x": [float(v) for v in self.x],
            "eps": self.eps,
            "lam": self.lam,
            "u": [float(v) for v in self.u],
            "u_norm": self.u_norm,
            "checks": dict(self.checks),
        }


@dataclass
class Trajectory:
    iterates: list
    status: str                       # converged | escaped | budget-exhausted | unbounded-below
    x_final: np.ndarray
    phi_final: float
    escape_direction: np.ndarray = None
    phi_limit_estimate: float = None
    ekeland_witnesses: list = field(default_factory=list)
    projected_start: bool = False
    meta: dict = field(default_factory=dict)

    def to_jsonable(self):
        return {
            "status": self.status,
            "iterates": [{"x": [float(v) for v in x], "phi": float(p)} for x, p in self.iterates],
            "x_final": [float(v) for v in self.x_final],
            "phi_final": float(self.phi_final),
            "escape_direction": None if self.escape_direction is None
            else [float(v) for v in self.escape_direction],
            "phi_limit_estimate": self.phi_limit_estimate,
            "ekeland_witnesses": [w.to_jsonable() for w in self.ekeland_witnesses],
            "projected_start": self.projected_start,
            "meta": dict(self.meta),
        }

    def write_csv(self, path):
        n = len(self.x_final)
        header = "k," + ",".join(f"x_{i + 1}" for i in range(n)) + ",phi"
        lines = [header]
        for k, (x, p) in enumerate(self.iterates):
            lines.append(f"{k}," + ",".join(repr(float(v)) for v in x) + f",{p!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _penalized_expr(p: MinimaxProblem, rho):
    psi = p.phi_expr()
    if not p.constraints:
        return psi
    zero = ex.constant(0.0, p.n)
    terms = [ex.max_of([g, zero]) for g in p.constraints]
    total = terms[0]
    for t in terms[1:]:
        total = ex.add(total, t)
    return ex.add(psi, ex.scale(rho, total))


def _least_norm_subgrad(e: Expr, x):
    return least_norm(subdiff_at(e, x))


def minimize(p: MinimaxProblem, x0, budget=500, step_policy="adaptive",
             lower_estimate=None, escape_floor=1e3, seed=0):
    """Drive max f_i downhill over F; classify the endpoint.

    step_policy:
      "adaptive"    doubling/halving displacement control (default)
      "polyak"      target gap over subgradient norm, needs lower_estimate
      "diminishing" base/(k+1) candidate steps (kept for reference; too slow
                    to certify escapes)
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != p.n:
        raise DescentError("start point dimension mismatch")
    x = p.ground.project(x0)
    projected = bool(np.linalg.norm(x - x0) > 1e-12 * (1 + np.linalg.norm(x0)))

    rho = PENALTY_START
    psi_expr = _penalized_expr(p, rho)

    def psi_val(y):
        return ex.evaluate(psi_expr, y)

    try:
        psi_cur = psi_val(x)
        phi_cur = p.phi(x)
    except DomainError as err:
        raise DescentError(f"objective undefined at the start point: {err}")

    tol_flat = 1e-8 * (1.0 + abs(phi_cur))
    iterates = [(x.copy(), phi_cur)]
    base = 1.0
    d_prev = None
    d_accepted = None
    flat_run = 0
    infeasible_run = 0
    status = "budget-exhausted"
    stop_reason = "budget"

    for k in range(budget):
        if phi_cur < -1e12:
            status = "unbounded-below"
            stop_reason = "record below -1e12"
            break
        try:
            u = _least_norm_subgrad(psi_expr, x)
        except DomainError as err:
            stop_reason = f"subgradient undefined: {err}"
            status = "converged"
            break
        unorm = float(np.linalg.norm(u))
        if unorm > 0:
            d = -u / unorm
            d_prev = d
        elif d_prev is not None:
            d = d_prev
        else:
            status = "converged"
            stop_reason = "zero subgradient at start"
            break

        if step_policy == "polyak" and lower_estimate is not None and unorm > 0:
            t = max((psi_cur - lower_estimate), 0.0) / unorm
            t = min(max(t, 1e-16), base * 4)
        elif step_policy == "diminishing":
            t = base / (k + 1.0)
        else:
            t = base

        accepted = False
        for _ in range(45):
            xn = p.ground.project(x + t * d)
            try:
                psin = psi_val(xn)
            except DomainError:
                t *= 0.5
                continue
            if psin < psi_cur:
                accepted = True
                break
            # a value-flat move is only progress when it keeps drifting the
            # same way (deep escape tails); a reversal at equal value is the
            # start of an oscillation, so keep shrinking instead
            if psin == psi_cur and d_accepted is not None and float(d @ d_accepted) >= 0.999:
                accepted = True
                break
            t *= 0.5
            if t < 1e-280:
                break

        if not accepted:
            base *= 0.5
            if base < 1e-12 * (1.0 + float(np.linalg.norm(x))):
                status = "converged"
                stop_reason = "step collapse"
                break
            continue

        decrease = psi_cur - psin
        flat_run = flat_run + 1 if decrease <= 1e-15 * (1.0 + abs(psi_cur)) else 0
        x = xn
        psi_cur = psin
        d_accepted = d
        base = min(max(t * 2.0, 1e-14), 1e14)

        phi_new = p.phi(x)
        if phi_new <= iterates[-1][1] + 1e-12:
            iterates.append((x.copy(), phi_new))
        phi_cur = phi_new

        viol = p.constraint_violation(x)
        infeasible_run = infeasible_run + 1 if viol > 1e-8 * (1 + abs(viol)) else 0
        if infeasible_run >= 5:
            rho *= 2.0
            if rho > PENALTY_CAP:
                raise PenaltyOverflowError("exact-penalty weight overflow")
            psi_expr = _penalized_expr(p, rho)
            psi_cur = psi_val(x)
            infeasible_run = 0

        if flat_run >= PLATEAU_BUDGET:
            status = "converged"
            stop_reason = "objective plateau"
            break

    traj = Trajectory(iterates=iterates, status=status, x_final=x.copy(),
                      phi_final=phi_cur, projected_start=projected,
                      meta={"stop_reason": stop_reason, "penalty_weight": rho,
                            "policy": step_policy, "budget": budget})
    _classify_escape(p, traj, escape_floor, tol_flat, seed)
    return traj


def _classify_escape(p, traj, escape_floor, tol_flat, seed):
    tail = traj.iterates[-10:]
    if len(tail) < 10:
        return
    norms = [float(np.linalg.norm(x)) for x, _ in tail]
    if min(norms) < escape_floor:
        return
    if any(b < a * (1 - 1e-9) for a, b in zip(norms, norms[1:])):
        return
    phis = [phi for _, phi in tail]
    if phis[0] - phis[-1] >= tol_flat:
        return

    phi_limit = phis[-1]
    witnesses = []
    picks = [traj.iterates[i] for i in (-8, -5, -3, -1)]
    for j, (xk, phik) in enumerate(picks):
        eps = max(phik - phi_limit, 0.0) + 1e-16 * (1.0 + abs(phi_limit))
        lam = math.sqrt(eps)
        try:
            w = _perturbed_witness(p, xk, eps, lam, budget=80, seed=seed + j)
        except (DomainError, DescentError):
            continue
        witnesses.append(w)
    if not any(w.u_norm <= WITNESS_U_TOL for w in witnesses):
        return

    traj.status = "escaped"
    x_last = traj.iterates[-1][0]
    nrm = float(np.linalg.norm(x_last))
    traj.escape_direction = x_last / nrm if nrm > 0 else x_last
    traj.phi_limit_estimate = float(phi_limit)
    traj.ekeland_witnesses = witnesses
    traj.meta["stop_reason"] = "escape certified"


def _perturbed_witness(p: MinimaxProblem, x0, eps, lam, budget=200, seed=0):
    """Descend h = phi + (eps/lam) ||. - x0|| and package the endpoint."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    c = eps / lam if lam > 0 else 0.0
    phi_expr = p.phi_expr()

    def h_val(y):
        return ex.evaluate(phi_expr, y) + c * float(np.linalg.norm(y - x0))

    def h_subgrad(y):
        u = _least_norm_subgrad(phi_expr, y)
        delta = y - x0
        nrm = float(np.linalg.norm(delta))
        if nrm > 0:
            return u + c * delta / nrm
        # at the anchor the norm term contributes the full ball: shrink
        un = float(np.linalg.norm(u))
        if un <= c:
            return np.zeros_like(u)
        return u * (1.0 - c / un)

    x = x0.copy()
    h_cur = h_val(x)
    base = max(lam, 1e-8)
    for _ in range(budget):
        g = h_subgrad(x)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            break
        d = -g / gn
        t = base
        accepted = False
        for _ in range(40):
            xn = p.ground.project(x + t * d)
            try:
                hn = h_val(xn)
            except DomainError:
                t *= 0.5
                continue
            if hn < h_cur - 1e-15 * (1 + abs(h_cur)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            base *= 0.5
            if base < 1e-14 * (1 + float(np.linalg.norm(x))):
                break
            continue
        x = xn
        h_cur = hn
        base = min(t * 2.0, 1e6)

    u = _least_norm_subgrad(phi_expr, x)
    return EkelandWitness(x=x, eps=float(eps), lam=float(lam), u=u,
                          u_norm=float(np.linalg.norm(u)))


def ekeland_witness(p: MinimaxProblem, x0, eps, inf_estimate=None, n_samples=200,
                    sample_radius_factor=10.0, seed=0):
    """Variational-principle witness at accuracy eps, with numeric checks.

    Returns an EkelandWitness whose checks dict records (i) descent of phi,
    (ii) proximity ||x1-x0|| <= lam, and (iii) perturbed global minimality on
    sampled points.  A sampled violation raises EkelandCertificationError with
    the offending point attached.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if eps <= 0:
        raise DescentError("eps must be positive")
    lam = math.sqrt(eps)
    w = _perturbed_witness(p, x0, eps, lam, budget=400, seed=seed)
    x1 = w.x
    phi0 = p.phi(x0)
    phi1 = p.phi(x1)
    c = eps / lam

    tol_i = 1e-9 * (1.0 + abs(phi0))
    check_i = phi1 <= phi0 + tol_i
    check_ii = float(np.linalg.norm(x1 - x0)) <= lam * (1.0 + 1e-9) + 1e-12

    rng = np.random.default_rng(seed)
    tol_iii = 1e-7 * (1.0 + abs(phi1))
    violator = None
    tested = 0
    for _ in range(n_samples):
        z = x1 + sample_radius_factor * lam * rng.standard_normal(x1.shape[0])
        z = p.ground.project(z)
        try:
            phiz = p.phi(z)
        except DomainError:
            continue
        tested += 1
        if phi1 > phiz + c * float(np.linalg.norm(z - x1)) + tol_iii:
            violator = z
            break
    check_iii = violator is None

    w.checks = {"descent": bool(check_i), "proximity": bool(check_ii),
                "perturbed_minimality": bool(check_iii), "samples_tested": tested}
    if not (check_i and check_ii):
        raise EkelandCertificationError(
            "witness violates the descent/proximity conclusions "
            f"(descent={check_i}, proximity={check_ii})", x1)
    if violator is not None:
        raise EkelandCertificationError(
            "a sampled point violates perturbed minimality", violator)
    return w


@dataclass
class EscapeEvidence:
    tail: list
    phi_limit_estimate: float
    direction: np.ndarray
    witnesses: list
    witness_norms: list

    def to_jsonable(self):
        return {
            "tail": [{"x": [float(v) for v in x], "phi": float(p)} for x, p in self.tail],
            "phi_limit_estimate": float(self.phi_limit_estimate),
            "direction": [float(v) for v in self.direction],
            "witnesses": [w.to_jsonable() for w in self.witnesses],
            "witness_norms": [float(v) for v in self.witness_norms],
        }


def escape_evidence(traj: Trajectory):
    """Package an escaped trajectory for cross-referencing by the analyzer."""
    if traj.status != "escaped":
        raise DescentError("trajectory did not escape; no evidence to package")
    return EscapeEvidence(
        tail=traj.iterates[-10:],
        phi_limit_estimate=traj.phi_limit_estimate,
        direction=traj.escape_direction,
        witnesses=traj.ekeland_witnesses,
        witness_norms=[w.u_norm for w in traj.ekeland_witnesses],
    )
