"""Scalar expressions with finitely many nonsmooth atoms.

The grammar admits abs/max/min on top of the usual smooth vocabulary; after
parsing, abs and min are rewritten so that max is the only nonsmooth atom:

    abs(u)         ->  max(u, -u)
    min(u1,...,uk) ->  -max(-u1,...,-uk)

Every expression is therefore a max-of-smooth composition, and the whole
branch calculus (active profiles, selection gradients) only ever deals with
max nodes.  Expressions are immutable; eval and gradients are pure.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import product

import numpy as np

# activity tolerance is relative: a branch is active when it is within
# TAU_ACT * (1 + |achieved value|) of the max
TAU_ACT = 1e-9

# enumeration cap for simultaneously active smooth selections
MAX_ACTIVE_SELECTIONS = 64


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class DomainError(ExprError):
    """Evaluation left the natural domain (log/sqrt/division/indeterminate).

    kind is "overflow" when the failure came from values blowing past double
    range (which far-field samplers read as divergence evidence) and "domain"
    for genuine domain exits.
    """

    def __init__(self, message, node=None, kind="domain"):
        super().__init__(message)
        self.node = node
        self.kind = kind


# ---------------------------------------------------------------------------
# nodes

class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    index: int  # 0-based


@dataclass(frozen=True)
class Add(Node):
    a: Node
    b: Node


@dataclass(frozen=True)
class Sub(Node):
    a: Node
    b: Node


@dataclass(frozen=True)
class Mul(Node):
    a: Node
    b: Node


@dataclass(frozen=True)
class Div(Node):
    a: Node
    b: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int


@dataclass(frozen=True)
class Neg(Node):
    a: Node


@dataclass(frozen=True)
class Call(Node):
    name: str  # exp | log | sqrt | atan
    arg: Node


@dataclass(frozen=True)
class Max(Node):
    args: tuple


_SMOOTH_FUNCS = ("exp", "log", "sqrt", "atan")


@dataclass(frozen=True)
class Expr:
    """A parsed expression over variables x1..xn."""

    root: Node
    dim: int

    def __str__(self):
        return to_string(self.root)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __neg__(self):
        return negate(self)

    def max_nodes(self):
        """Max nodes in structural preorder (repeats included for shared DAGs)."""
        out = []
        _collect_max(self.root, out)
        return out


def _collect_max(node, out):
    if isinstance(node, Max):
        out.append(node)
        for a in node.args:
            _collect_max(a, out)
    elif isinstance(node, (Add, Sub, Mul, Div)):
        _collect_max(node.a, out)
        _collect_max(node.b, out)
    elif isinstance(node, Pow):
        _collect_max(node.base, out)
    elif isinstance(node, (Neg, Call)):
        _collect_max(node.a if isinstance(node, Neg) else node.arg, out)


@dataclass(frozen=True)
class ActiveProfile:
    """Per max node (structural preorder): the branch indices within tolerance."""

    selections: tuple

    @property
    def is_smooth(self):
        return all(len(s) == 1 for s in self.selections)

    def smooth_selections(self):
        """Enumerate all one-branch-per-node choices, deterministically."""
        if not self.selections:
            return [()]
        return [tuple(c) for c in product(*self.selections)]

    def selection_count(self):
        count = 1
        for s in self.selections:
            count *= len(s)
        return count


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<var>x\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == m.start():
            line = text.count("\n", 0, pos) + 1
            col = pos - (text.rfind("\n", 0, pos) + 1) + 1
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        pos = m.end()
        kind = m.lastgroup
        if kind is None:
            continue
        start = m.start(kind)
        line = text.count("\n", 0, start) + 1
        col = start - (text.rfind("\n", 0, start) + 1) + 1
        tokens.append((kind, m.group(kind), line, col))
    tokens.append(("end", "", text.count("\n") + 1, len(text) - (text.rfind("\n") + 1) + 1))
    return tokens


class _Parser:
    def __init__(self, tokens, dim):
        self.tokens = tokens
        self.pos = 0
        self.dim = dim

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok[2], tok[3])

    def expect_op(self, op):
        kind, val, *_ = self.peek()
        if kind != "op" or val != op:
            self.error(f"expected {op!r}")
        return self.take()

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected trailing input {self.peek()[1]!r}")
        return node

    def expr(self):
        kind, val, *_ = self.peek()
        negated = False
        if kind == "op" and val in "+-":
            self.take()
            negated = val == "-"
        node = self.term()
        if negated:
            node = Neg(node)
        while True:
            kind, val, *_ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                node = Add(node, rhs) if val == "+" else Sub(node, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, *_ = self.peek()
            if kind == "op" and val in "*/":
                self.take()
                rhs = self.factor()
                node = Mul(node, rhs) if val == "*" else Div(node, rhs)
            else:
                return node

    def factor(self):
        node = self.base()
        kind, val, *_ = self.peek()
        if kind == "op" and val == "^":
            self.take()
            node = Pow(node, self.integer())
        return node

    def integer(self):
        sign = 1
        kind, val, *_ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            sign = -1 if val == "-" else 1
        tok = self.peek()
        if tok[0] != "num":
            self.error("expected an integer exponent", tok)
        self.take()
        if not re.fullmatch(r"\d+", tok[1]):
            self.error("exponent must be an integer (use exp/log for fractional powers)", tok)
        return sign * int(tok[1])

    def base(self):
        kind, val, line, col = self.peek()
        if kind == "num":
            self.take()
            return Const(float(val))
        if kind == "var":
            self.take()
            idx = int(val[1:])
            if idx < 1 or idx > self.dim:
                raise ParseError(f"variable {val} out of range 1..{self.dim}", line, col)
            return Var(idx - 1)
        if kind == "op" and val == "(":
            self.take()
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "name":
            self.take()
            self.expect_op("(")
            args = [self.expr()]
            while self.peek()[0] == "op" and self.peek()[1] == ",":
                self.take()
                args.append(self.expr())
            self.expect_op(")")
            return self.call(val, args, line, col)
        self.error(f"unexpected token {val!r}")

    def call(self, name, args, line, col):
        if name in _SMOOTH_FUNCS:
            if len(args) != 1:
                raise ParseError(f"{name} takes exactly one argument", line, col)
            return Call(name, args[0])
        if name == "abs":
            if len(args) != 1:
                raise ParseError("abs takes exactly one argument", line, col)
            return Max((args[0], Neg(args[0])))
        if name == "max":
            if len(args) < 2:
                raise ParseError("max takes at least two arguments", line, col)
            return Max(tuple(args))
        if name == "min":
            if len(args) < 2:
                raise ParseError("min takes at least two arguments", line, col)
            return Neg(Max(tuple(Neg(a) for a in args)))
        raise ParseError(f"unknown function {name!r}", line, col)


def parse(text, dim):
    """Parse an expression over x1..xdim.  Raises ParseError on bad input."""
    if dim < 1:
        raise ExprError("dimension must be at least 1")
    return Expr(root=_Parser(_tokenize(text), dim).parse(), dim=dim)


# ---------------------------------------------------------------------------
# printing (round-trips through parse to a structurally equal DAG)

def _paren(s):
    return "(" + s + ")"


def to_string(node):
    if isinstance(node, Const):
        return repr(node.value) if node.value != int(node.value) else str(int(node.value))
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Add):
        return f"{to_string(node.a)} + {_addend(node.b)}"
    if isinstance(node, Sub):
        return f"{to_string(node.a)} - {_addend(node.b)}"
    if isinstance(node, Mul):
        return f"{_mulend(node.a, left=True)}*{_mulend(node.b, left=False)}"
    if isinstance(node, Div):
        return f"{_mulend(node.a, left=True)}/{_mulend(node.b, left=False)}"
    if isinstance(node, Pow):
        base = to_string(node.base)
        if not isinstance(node.base, (Const, Var, Call, Max)) or (
            isinstance(node.base, Const) and node.base.value < 0
        ):
            base = _paren(base)
        return f"{base}^{node.exponent}"
    if isinstance(node, Neg):
        return _paren("-" + _mulend(node.a, left=False))
    if isinstance(node, Call):
        return f"{node.name}({to_string(node.arg)})"
    if isinstance(node, Max):
        return "max(" + ", ".join(to_string(a) for a in node.args) + ")"
    raise ExprError(f"unknown node {node!r}")


def _addend(node):
    s = to_string(node)
    return _paren(s) if isinstance(node, (Add, Sub)) else s


def _mulend(node, left):
    s = to_string(node)
    if isinstance(node, (Add, Sub)):
        return _paren(s)
    if not left and isinstance(node, (Mul, Div)):
        return _paren(s)
    return s


# ---------------------------------------------------------------------------
# evaluation

def _check_arity(x, dim):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != dim:
        raise ExprError(f"point has dimension {x.shape[0]}, expression expects {dim}")
    return x


def evaluate(e: Expr, x):
    """Value at x with double-precision semantics (overflow saturates to inf)."""
    x = _check_arity(x, e.dim)
    return _eval(e.root, x)


def _eval(node, x):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index])
    if isinstance(node, Add):
        return _finite(_eval(node.a, x) + _eval(node.b, x), node)
    if isinstance(node, Sub):
        return _finite(_eval(node.a, x) - _eval(node.b, x), node)
    if isinstance(node, Mul):
        return _finite(_eval(node.a, x) * _eval(node.b, x), node)
    if isinstance(node, Div):
        d = _eval(node.b, x)
        if d == 0.0:
            raise DomainError("division by zero", node)
        return _finite(_eval(node.a, x) / d, node)
    if isinstance(node, Pow):
        b = _eval(node.base, x)
        if b == 0.0 and node.exponent < 0:
            raise DomainError("zero raised to a negative power", node)
        try:
            return _finite(float(b) ** node.exponent, node)
        except OverflowError:
            return math.inf if (b > 0 or node.exponent % 2 == 0) else -math.inf
    if isinstance(node, Neg):
        return -_eval(node.a, x)
    if isinstance(node, Call):
        v = _eval(node.arg, x)
        if node.name == "exp":
            try:
                return math.exp(v)
            except OverflowError:
                return math.inf
        if node.name == "log":
            if v <= 0.0:
                raise DomainError("log of a nonpositive value", node)
            return math.log(v)
        if node.name == "sqrt":
            if v < 0.0:
                raise DomainError("sqrt of a negative value", node)
            return math.sqrt(v)
        if node.name == "atan":
            return math.atan(v)
    if isinstance(node, Max):
        return max(_eval(a, x) for a in node.args)
    raise ExprError(f"unknown node {node!r}")


def _finite(v, node):
    if math.isnan(v):
        raise DomainError("indeterminate value (nan)", node, kind="overflow")
    return v


# ---------------------------------------------------------------------------
# active profiles and selection gradients

def active_profile(e: Expr, x, tau=TAU_ACT):
    """Branches of every max node within the relative activity tolerance."""
    x = _check_arity(x, e.dim)
    selections = []
    _profile(e.root, x, tau, selections)
    return ActiveProfile(selections=tuple(selections))


def _profile(node, x, tau, out):
    if isinstance(node, Max):
        vals = [_eval(a, x) for a in node.args]
        vmax = max(vals)
        tol = tau * (1.0 + abs(vmax))
        out.append(tuple(i for i, v in enumerate(vals) if vmax - v <= tol))
        for a in node.args:
            _profile(a, x, tau, out)
    elif isinstance(node, (Add, Sub, Mul, Div)):
        _profile(node.a, x, tau, out)
        _profile(node.b, x, tau, out)
    elif isinstance(node, Pow):
        _profile(node.base, x, tau, out)
    elif isinstance(node, Neg):
        _profile(node.a, x, tau, out)
    elif isinstance(node, Call):
        _profile(node.arg, x, tau, out)


def grad_smooth(e: Expr, x, profile):
    """Exact gradient of the smooth branch selected by `profile`.

    `profile` is either an ActiveProfile with singleton selections or a flat
    sequence of branch indices, one per max node in structural preorder.
    """
    x = _check_arity(x, e.dim)
    if isinstance(profile, ActiveProfile):
        if not profile.is_smooth:
            raise ExprError("profile does not fix a single branch per max node")
        choice = tuple(s[0] for s in profile.selections)
    else:
        choice = tuple(int(c) for c in profile)
    cursor = [0]
    _, g = _grad(e.root, x, choice, cursor)
    if cursor[0] != len(choice):
        raise ExprError("profile inconsistent with the expression structure")
    return g


def _grad(node, x, choice, cursor):
    n = x.shape[0]
    if isinstance(node, Const):
        return node.value, np.zeros(n)
    if isinstance(node, Var):
        g = np.zeros(n)
        g[node.index] = 1.0
        return float(x[node.index]), g
    if isinstance(node, Add):
        va, ga = _grad(node.a, x, choice, cursor)
        vb, gb = _grad(node.b, x, choice, cursor)
        return _finite(va + vb, node), ga + gb
    if isinstance(node, Sub):
        va, ga = _grad(node.a, x, choice, cursor)
        vb, gb = _grad(node.b, x, choice, cursor)
        return _finite(va - vb, node), ga - gb
    if isinstance(node, Mul):
        va, ga = _grad(node.a, x, choice, cursor)
        vb, gb = _grad(node.b, x, choice, cursor)
        return _finite(va * vb, node), va * gb + vb * ga
    if isinstance(node, Div):
        va, ga = _grad(node.a, x, choice, cursor)
        vb, gb = _grad(node.b, x, choice, cursor)
        if vb == 0.0:
            raise DomainError("division by zero", node)
        return _finite(va / vb, node), (ga * vb - va * gb) / (vb * vb)
    if isinstance(node, Pow):
        vb, gb = _grad(node.base, x, choice, cursor)
        k = node.exponent
        if vb == 0.0 and k < 0:
            raise DomainError("zero raised to a negative power", node)
        if k == 0:
            return 1.0, np.zeros(n)
        try:
            val = float(vb) ** k
            dval = k * float(vb) ** (k - 1)
        except OverflowError:
            raise DomainError("power overflow", node, kind="overflow")
        return _finite(val, node), dval * gb
    if isinstance(node, Neg):
        v, g = _grad(node.a, x, choice, cursor)
        return -v, -g
    if isinstance(node, Call):
        v, g = _grad(node.arg, x, choice, cursor)
        if node.name == "exp":
            try:
                ev = math.exp(v)
            except OverflowError:
                ev = math.inf
            return ev, ev * g
        if node.name == "log":
            if v <= 0.0:
                raise DomainError("log of a nonpositive value", node)
            return math.log(v), g / v
        if node.name == "sqrt":
            if v <= 0.0:
                raise DomainError("sqrt gradient needs a positive argument", node)
            sv = math.sqrt(v)
            return sv, g / (2.0 * sv)
        if node.name == "atan":
            return math.atan(v), g / (1.0 + v * v)
    if isinstance(node, Max):
        if cursor[0] >= len(choice):
            raise ExprError("profile inconsistent with the expression structure")
        pick = choice[cursor[0]]
        cursor[0] += 1
        if pick < 0 or pick >= len(node.args):
            raise ExprError("profile selects a branch the max node does not have")
        result = None
        for i, a in enumerate(node.args):
            if i == pick:
                result = _grad(a, x, choice, cursor)
            else:
                _skip_max_slots(a, cursor)
        return result
    raise ExprError(f"unknown node {node!r}")


def _skip_max_slots(node, cursor):
    sub = []
    _collect_max(node, sub)
    cursor[0] += len(sub)


# ---------------------------------------------------------------------------
# composition helpers (build new expressions from parsed pieces)

def _same_dim(e1, e2):
    if e1.dim != e2.dim:
        raise ExprError("dimension mismatch between expressions")
    return e1.dim


def add(e1: Expr, e2: Expr):
    return Expr(Add(e1.root, e2.root), _same_dim(e1, e2))


def sub(e1: Expr, e2: Expr):
    return Expr(Sub(e1.root, e2.root), _same_dim(e1, e2))


def negate(e: Expr):
    return Expr(Neg(e.root), e.dim)


def shift(e: Expr, c):
    """e + c with the constant folded onto the proper side of the grammar."""
    c = float(c)
    if c == 0.0:
        return e
    if c < 0:
        return Expr(Sub(e.root, Const(-c)), e.dim)
    return Expr(Add(e.root, Const(c)), e.dim)


def scale(c, e: Expr):
    c = float(c)
    if c < 0:
        return Expr(Neg(Mul(Const(-c), e.root)), e.dim)
    return Expr(Mul(Const(c), e.root), e.dim)


def max_of(exprs):
    exprs = list(exprs)
    if not exprs:
        raise ExprError("max_of needs at least one expression")
    if len(exprs) == 1:
        return exprs[0]
    dim = exprs[0].dim
    for e in exprs[1:]:
        if e.dim != dim:
            raise ExprError("dimension mismatch between expressions")
    return Expr(Max(tuple(e.root for e in exprs)), dim)


def constant(value, dim):
    value = float(value)
    if value < 0:
        return Expr(Neg(Const(-value)), dim)
    return Expr(Const(value), dim)
