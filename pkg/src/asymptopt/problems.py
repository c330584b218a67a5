"""Problem containers shared by the analyzer, the descent engine and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .expr import Expr
from .subdiff import GroundSet


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class MinimaxProblem:
    """min over F of max_i f_i(x), with F = {x in Omega : g_j(x) <= 0}."""

    objectives: tuple
    constraints: tuple
    ground: GroundSet

    def __post_init__(self):
        if len(self.objectives) < 1:
            raise ProblemError("a minimax problem needs at least one objective")
        n = self.objectives[0].dim
        for e in tuple(self.objectives) + tuple(self.constraints):
            if e.dim != n:
                raise ProblemError("all expressions must share one dimension")
        if self.ground.dim != n:
            raise ProblemError("ground set dimension differs from the expressions")

    @staticmethod
    def build(objectives, constraints=(), ground=None):
        objectives = tuple(objectives)
        constraints = tuple(constraints)
        if ground is None:
            if not objectives:
                raise ProblemError("a minimax problem needs at least one objective")
            ground = GroundSet.full_space(objectives[0].dim)
        return MinimaxProblem(objectives=objectives, constraints=constraints, ground=ground)

    @property
    def n(self):
        return self.objectives[0].dim

    @property
    def m(self):
        return len(self.objectives)

    @property
    def p(self):
        return len(self.constraints)

    def phi_expr(self) -> Expr:
        """The max of the objectives as one expression."""
        return ex.max_of(list(self.objectives))

    def phi(self, x):
        return max(ex.evaluate(f, x) for f in self.objectives)

    def constraint_violation(self, x):
        if not self.constraints:
            return 0.0
        return max(0.0, max(ex.evaluate(g, x) for g in self.constraints))

    def feasible(self, x, tol=1e-6):
        x = np.asarray(x, dtype=float).reshape(-1)
        slack = tol * (1.0 + float(np.linalg.norm(x)))
        if not self.ground.contains(x):
            return False
        return all(ex.evaluate(g, x) <= slack for g in self.constraints)


@dataclass(frozen=True)
class VectorProblem:
    """Vector objective over the same feasible-set structure (m >= 2)."""

    objectives: tuple
    constraints: tuple
    ground: GroundSet

    def __post_init__(self):
        if len(self.objectives) < 2:
            raise ProblemError("a vector problem needs at least two objectives")
        n = self.objectives[0].dim
        for e in tuple(self.objectives) + tuple(self.constraints):
            if e.dim != n:
                raise ProblemError("all expressions must share one dimension")
        if self.ground.dim != n:
            raise ProblemError("ground set dimension differs from the expressions")

    @staticmethod
    def build(objectives, constraints=(), ground=None):
        objectives = tuple(objectives)
        constraints = tuple(constraints)
        if ground is None:
            if not objectives:
                raise ProblemError("a vector problem needs objectives")
            ground = GroundSet.full_space(objectives[0].dim)
        return VectorProblem(objectives=objectives, constraints=constraints, ground=ground)

    @property
    def n(self):
        return self.objectives[0].dim

    @property
    def m(self):
        return len(self.objectives)

    def values(self, x):
        return np.array([ex.evaluate(f, x) for f in self.objectives])

    def feasible(self, x, tol=1e-6):
        return MinimaxProblem(self.objectives[:1], self.constraints, self.ground).feasible(x, tol)
