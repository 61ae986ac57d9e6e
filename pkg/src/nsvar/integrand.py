"""Integrand expression trees with a pointwise subdifferential calculus.

An integrand f(x, z, t) is a tree over the variables x1..xn (state),
z1..zn (derivative) and t, built from arithmetic, a few smooth
elementary functions, and three nonsmooth constructs: ``abs``, ``max``
and the Euclidean ``norm``.  The grammar deliberately restricts where
the nonsmooth constructs may appear so that an exact convex
subdifferential is available at every point:

* smooth subtrees contribute singleton gradients,
* sums add subdifferentials (Minkowski sum),
* nonnegative constant factors scale them,
* ``abs``/``max`` at a tie contribute the convex hull of the active
  branch gradients, and ``norm`` at a zero of its argument contributes a
  ball in the spanned coordinate subspace.

Nonsmooth nodes inside ``*``, ``/``, ``pow``, ``sin``, ``cos``, ``exp``
or ``sqrt`` are rejected when the expression is parsed, except for
multiplication by a constant.

Subdifferentials live in R^(2n), laid out as the n x-partials followed
by the n z-partials.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .convexgeom import (
    Ball,
    ConvexSet,
    MinkowskiSum,
    Polytope,
    Scaled,
    Singleton,
    negate,
    scale,
    support,
)

__all__ = [
    "Const", "Time", "VarX", "VarZ", "Neg", "Add", "Sub", "Mul", "Div",
    "Pow", "Sin", "Cos", "Exp", "Sqrt", "Abs", "Max", "Norm", "Expr",
    "EvalPoint", "ExprError", "ParseError", "DomainError", "SubdiffError",
    "parse_expr", "format_expr", "eval_expr", "eval_expr_grid",
    "subdiff_expr", "directional_derivative", "uses_var_z", "is_smooth",
]


class ExprError(ValueError):
    """Base class for expression-level failures."""


class ParseError(ExprError):
    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class DomainError(ExprError):
    def __init__(self, message: str, t: float, node_index: int | None = None):
        where = f" at t={t!r}" + ("" if node_index is None else f" (node {node_index})")
        super().__init__(message + where)
        self.t = t
        self.node_index = node_index


class SubdiffError(ExprError):
    """Raised when no exact subdifferential is representable."""


# ---------------------------------------------------------------------------
# nodes


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Time:
    pass


@dataclass(frozen=True)
class VarX:
    index: int  # 1-based


@dataclass(frozen=True)
class VarZ:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Add:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Sub:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Mul:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Div:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int  # integer >= 1


@dataclass(frozen=True)
class Sin:
    arg: "Expr"


@dataclass(frozen=True)
class Cos:
    arg: "Expr"


@dataclass(frozen=True)
class Exp:
    arg: "Expr"


@dataclass(frozen=True)
class Sqrt:
    arg: "Expr"


@dataclass(frozen=True)
class Abs:
    arg: "Expr"


@dataclass(frozen=True)
class Max:
    args: tuple


@dataclass(frozen=True)
class Norm:
    args: tuple


Expr = (
    Const | Time | VarX | VarZ | Neg | Add | Sub | Mul | Div | Pow
    | Sin | Cos | Exp | Sqrt | Abs | Max | Norm
)


@dataclass
class EvalPoint:
    """A point (x, z, t) at which to evaluate an integrand."""

    x: np.ndarray
    z: np.ndarray
    t: float

    def __post_init__(self) -> None:
        self.x = np.atleast_1d(np.asarray(self.x, float))
        self.z = np.atleast_1d(np.asarray(self.z, float))
        if self.x.shape != self.z.shape:
            raise ValueError("x and z must have the same length")


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[a-z]+\d*)"
    r"|(?P<sym>[-+*/(),]))"
)

_FUNCS = {"sin", "cos", "exp", "sqrt", "abs", "pow", "max", "norm"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise ParseError(f"unexpected character {rest[0]!r}", pos)
        if m.lastgroup is not None:
            tokens.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_sym(self, sym: str):
        kind, val, pos = self.next()
        if kind != "sym" or val != sym:
            raise ParseError(f"expected {sym!r}, found {val!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "sym" and val in "+-":
                self.next()
                rhs = self.term()
                e = Add(e, rhs) if val == "+" else Sub(e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "sym" and val in "*/":
                self.next()
                rhs = self.factor()
                e = Mul(e, rhs) if val == "*" else Div(e, rhs)
            else:
                return e

    def factor(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "sym" and val == "-":
            self.next()
            inner = self.atom()
            if isinstance(inner, Const):
                return Const(-inner.value)  # fold literal sign
            return Neg(inner)
        return self.atom()

    def atom(self) -> Expr:
        kind, val, pos = self.next()
        if kind == "num":
            return Const(float(val))
        if kind == "sym" and val == "(":
            e = self.expr()
            self.expect_sym(")")
            return e
        if kind == "name":
            if val == "t":
                return Time()
            m = re.fullmatch(r"([xz])(\d+)", val)
            if m:
                idx = int(m.group(2))
                if idx < 1:
                    raise ParseError(f"variable index must be >= 1: {val!r}", pos)
                return VarX(idx) if m.group(1) == "x" else VarZ(idx)
            if val in _FUNCS:
                return self.call(val, pos)
            raise ParseError(f"unknown identifier {val!r}", pos)
        raise ParseError(f"unexpected token {val!r}", pos)

    def call(self, name: str, pos: int) -> Expr:
        self.expect_sym("(")
        args = [self.expr()]
        while True:
            kind, val, p2 = self.peek()
            if kind == "sym" and val == ",":
                self.next()
                args.append(self.expr())
            else:
                break
        self.expect_sym(")")
        if name in ("sin", "cos", "exp", "sqrt", "abs"):
            if len(args) != 1:
                raise ParseError(f"{name} takes exactly 1 argument", pos)
            cls = {"sin": Sin, "cos": Cos, "exp": Exp, "sqrt": Sqrt, "abs": Abs}[name]
            return cls(args[0])
        if name == "pow":
            if len(args) != 2:
                raise ParseError("pow takes exactly 2 arguments", pos)
            exponent = args[1]
            if not isinstance(exponent, Const) or exponent.value != int(exponent.value):
                raise ParseError("pow exponent must be an integer literal", pos)
            k = int(exponent.value)
            if k < 1:
                raise ParseError(f"pow exponent must be >= 1, got {k}", pos)
            return Pow(args[0], k)
        if name == "max":
            if len(args) < 2:
                raise ParseError("max takes at least 2 arguments", pos)
            return Max(tuple(args))
        if name == "norm":
            return Norm(tuple(args))
        raise ParseError(f"unknown function {name!r}", pos)


def is_smooth(e: Expr) -> bool:
    """True when the subtree contains no abs/max/norm node."""
    if isinstance(e, (Abs, Max, Norm)):
        return False
    if isinstance(e, (Const, Time, VarX, VarZ)):
        return True
    if isinstance(e, Neg):
        return is_smooth(e.arg)
    if isinstance(e, (Add, Sub, Mul, Div)):
        return is_smooth(e.left) and is_smooth(e.right)
    if isinstance(e, Pow):
        return is_smooth(e.base)
    if isinstance(e, (Sin, Cos, Exp, Sqrt)):
        return is_smooth(e.arg)
    raise TypeError(f"not an Expr: {e!r}")


def uses_var_z(e: Expr) -> bool:
    if isinstance(e, VarZ):
        return True
    if isinstance(e, (Const, Time, VarX)):
        return False
    if isinstance(e, (Neg, Sin, Cos, Exp, Sqrt, Abs)):
        return uses_var_z(e.arg)
    if isinstance(e, (Add, Sub, Mul, Div)):
        return uses_var_z(e.left) or uses_var_z(e.right)
    if isinstance(e, Pow):
        return uses_var_z(e.base)
    if isinstance(e, (Max, Norm)):
        return any(uses_var_z(a) for a in e.args)
    raise TypeError(f"not an Expr: {e!r}")


def _validate(e: Expr, n: int, allow_vars: bool, smooth_only: bool) -> None:
    if isinstance(e, (Const, Time)):
        return
    if isinstance(e, (VarX, VarZ)):
        if not allow_vars:
            raise ExprError("only t may appear in this expression")
        if not 1 <= e.index <= n:
            kind = "x" if isinstance(e, VarX) else "z"
            raise ExprError(f"variable {kind}{e.index} out of range 1..{n}")
        return
    if isinstance(e, Neg):
        _validate(e.arg, n, allow_vars, smooth_only)
        return
    if isinstance(e, (Add, Sub)):
        _validate(e.left, n, allow_vars, smooth_only)
        _validate(e.right, n, allow_vars, smooth_only)
        return
    if isinstance(e, Mul):
        left_const = isinstance(e.left, Const)
        right_const = isinstance(e.right, Const)
        if left_const or right_const:
            c = e.left.value if left_const else e.right.value
            other = e.right if left_const else e.left
            if c < 0.0 and not is_smooth(other):
                raise ExprError(
                    "nonsmooth subexpression scaled by a negative constant"
                )
            _validate(other, n, allow_vars, smooth_only)
            return
        for side in (e.left, e.right):
            if not is_smooth(side):
                raise ExprError("nonsmooth subexpression inside a product")
            _validate(side, n, allow_vars, True)
        return
    if isinstance(e, Div):
        for side in (e.left, e.right):
            if not is_smooth(side):
                raise ExprError("nonsmooth subexpression inside a quotient")
            _validate(side, n, allow_vars, True)
        return
    if isinstance(e, Pow):
        if not is_smooth(e.base):
            raise ExprError("nonsmooth subexpression inside pow")
        _validate(e.base, n, allow_vars, True)
        return
    if isinstance(e, (Sin, Cos, Exp, Sqrt)):
        if not is_smooth(e.arg):
            raise ExprError(
                f"nonsmooth subexpression inside {type(e).__name__.lower()}"
            )
        _validate(e.arg, n, allow_vars, True)
        return
    if isinstance(e, (Abs, Max, Norm)):
        if smooth_only:
            raise ExprError(
                f"{type(e).__name__.lower()} not allowed inside a smooth-only context"
            )
        args = e.args if isinstance(e, (Max, Norm)) else (e.arg,)
        for a in args:
            _validate(a, n, allow_vars, False)
        return
    raise TypeError(f"not an Expr: {e!r}")


def parse_expr(text: str, n: int, allow_vars: bool = True) -> Expr:
    """Parse and validate an integrand over x1..xn, z1..zn, t."""
    e = _Parser(text).parse()
    _validate(e, n, allow_vars, False)
    return e


def format_expr(e: Expr) -> str:
    """Render an expression in the input grammar (reparseable)."""

    def fmt(node: Expr, prec: int) -> str:
        if isinstance(node, Const):
            s = repr(node.value)
            return s
        if isinstance(node, Time):
            return "t"
        if isinstance(node, VarX):
            return f"x{node.index}"
        if isinstance(node, VarZ):
            return f"z{node.index}"
        if isinstance(node, Neg):
            inner = fmt(node.arg, 9)
            if inner.startswith("-") or not isinstance(
                    node.arg, (Const, Time, VarX, VarZ, Sin, Cos, Exp,
                               Sqrt, Abs, Max, Norm, Pow)):
                inner = f"({inner})"
            s = f"-{inner}"
            return f"({s})" if prec > 1 else s
        if isinstance(node, (Add, Sub)):
            op = " + " if isinstance(node, Add) else " - "
            s = fmt(node.left, 1) + op + fmt(node.right, 2)
            return f"({s})" if prec > 1 else s
        if isinstance(node, (Mul, Div)):
            op = " * " if isinstance(node, Mul) else " / "
            s = fmt(node.left, 3) + op + fmt(node.right, 4)
            return f"({s})" if prec > 3 else s
        if isinstance(node, Pow):
            return f"pow({fmt(node.base, 0)}, {node.exponent})"
        if isinstance(node, (Sin, Cos, Exp, Sqrt, Abs)):
            name = type(node).__name__.lower()
            return f"{name}({fmt(node.arg, 0)})"
        if isinstance(node, Max):
            return "max(" + ", ".join(fmt(a, 0) for a in node.args) + ")"
        if isinstance(node, Norm):
            return "norm(" + ", ".join(fmt(a, 0) for a in node.args) + ")"
        raise TypeError(f"not an Expr: {node!r}")

    return fmt(e, 0)


# ---------------------------------------------------------------------------
# evaluation


def eval_expr_grid(e: Expr, x: np.ndarray, z: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorized evaluation at N points: x, z have shape (N, n), t (N,)."""

    def ev(node: Expr) -> np.ndarray:
        if isinstance(node, Const):
            return np.full(t.shape, node.value)
        if isinstance(node, Time):
            return t
        if isinstance(node, VarX):
            return x[:, node.index - 1]
        if isinstance(node, VarZ):
            return z[:, node.index - 1]
        if isinstance(node, Neg):
            return -ev(node.arg)
        if isinstance(node, Add):
            return ev(node.left) + ev(node.right)
        if isinstance(node, Sub):
            return ev(node.left) - ev(node.right)
        if isinstance(node, Mul):
            return ev(node.left) * ev(node.right)
        if isinstance(node, Div):
            den = ev(node.right)
            bad = den == 0.0
            if np.any(bad):
                i = int(np.argmax(bad))
                raise DomainError("division by zero", float(t[i]), i)
            return ev(node.left) / den
        if isinstance(node, Pow):
            return ev(node.base) ** node.exponent
        if isinstance(node, Sin):
            return np.sin(ev(node.arg))
        if isinstance(node, Cos):
            return np.cos(ev(node.arg))
        if isinstance(node, Exp):
            return np.exp(ev(node.arg))
        if isinstance(node, Sqrt):
            arg = ev(node.arg)
            bad = arg < 0.0
            if np.any(bad):
                i = int(np.argmax(bad))
                raise DomainError("sqrt of a negative value", float(t[i]), i)
            return np.sqrt(arg)
        if isinstance(node, Abs):
            return np.abs(ev(node.arg))
        if isinstance(node, Max):
            vals = [ev(a) for a in node.args]
            out = vals[0]
            for v in vals[1:]:
                out = np.maximum(out, v)
            return out
        if isinstance(node, Norm):
            acc = np.zeros_like(t)
            for a in node.args:
                v = ev(a)
                acc = acc + v * v
            return np.sqrt(acc)
        raise TypeError(f"not an Expr: {node!r}")

    return ev(e)


def eval_expr(e: Expr, p: EvalPoint) -> float:
    """Evaluate the integrand at one point."""
    out = eval_expr_grid(e, p.x[None, :], p.z[None, :], np.array([p.t]))
    return float(out[0])


# ---------------------------------------------------------------------------
# subdifferential


def _hull_vertices(s: ConvexSet) -> np.ndarray:
    """Vertex list generating s, for polytope-like sets only."""
    if isinstance(s, Singleton):
        return s.point[None, :]
    if isinstance(s, Polytope):
        return s.vertices
    if isinstance(s, Ball):
        if s.radius == 0.0:
            return s.center[None, :]
        raise SubdiffError(
            "tie between ball-valued subdifferentials is not representable"
        )
    if isinstance(s, MinkowskiSum):
        verts = _hull_vertices(s.members[0])
        for m in s.members[1:]:
            extra = _hull_vertices(m)
            if verts.shape[0] * extra.shape[0] > 4096:
                raise SubdiffError("tie produced too many hull vertices")
            verts = (verts[:, None, :] + extra[None, :, :]).reshape(-1, verts.shape[1])
        return verts
    if isinstance(s, Scaled):
        return s.factor * _hull_vertices(s.inner)
    raise TypeError(f"not a ConvexSet: {s!r}")


def _scale_signed(c: float, s: ConvexSet) -> ConvexSet:
    return scale(c, s) if c >= 0.0 else negate(scale(-c, s))


def _as_gradient(s: ConvexSet, context: str = "smooth") -> np.ndarray:
    """Collapse a set to its unique point; fail if it is genuinely fat."""
    if isinstance(s, Singleton):
        return s.point
    verts = _hull_vertices(s)
    if verts.shape[0] == 1:
        return verts[0]
    spread = np.max(np.abs(verts - verts[0]))
    if spread <= 1e-14 * (1.0 + np.max(np.abs(verts))):
        return verts[0]
    raise SubdiffError(
        f"argument of a {context} operation is nonsmooth at a tie point"
    )


def _msum(s1: ConvexSet, s2: ConvexSet) -> ConvexSet:
    if isinstance(s1, Singleton) and isinstance(s2, Singleton):
        return Singleton(s1.point + s2.point)
    parts = []
    for s in (s1, s2):
        parts.extend(s.members if isinstance(s, MinkowskiSum) else (s,))
    return MinkowskiSum(tuple(parts))


def _coordinate_ball(rows: np.ndarray, d: int) -> ConvexSet:
    """Image of the unit ball under J^T when J has scaled coordinate rows.

    rows is the (m, d) Jacobian of the norm arguments.  Zero rows drop
    out; the remaining rows must each touch a single distinct coordinate
    with a common magnitude c, giving a radius-c ball on those
    coordinates.  Anything else has no representation here.
    """
    mask = np.zeros(d, bool)
    mags = []
    for row in rows:
        scale_row = float(np.max(np.abs(row)))
        if scale_row == 0.0:
            continue
        nz = np.flatnonzero(np.abs(row) > 1e-12 * scale_row)
        if nz.shape[0] != 1:
            raise SubdiffError(
                "norm vanishes but its Jacobian is not coordinate-aligned"
            )
        j = int(nz[0])
        if mask[j]:
            raise SubdiffError("norm arguments share a coordinate at a zero")
        mask[j] = True
        mags.append(abs(float(row[j])))
    if not mags:
        return Singleton(np.zeros(d))
    if max(mags) - min(mags) > 1e-9 * (1.0 + max(mags)):
        raise SubdiffError("norm arguments have mismatched scales at a zero")
    return Ball(np.zeros(d), mags[0], mask)


def _value_and_set(e: Expr, p: EvalPoint, tol_act: float) -> tuple[float, ConvexSet]:
    n = p.x.shape[0]
    d = 2 * n

    def singleton_basis(slot: int) -> ConvexSet:
        g = np.zeros(d)
        g[slot] = 1.0
        return Singleton(g)

    def rec(node: Expr) -> tuple[float, ConvexSet]:
        if isinstance(node, Const):
            return node.value, Singleton(np.zeros(d))
        if isinstance(node, Time):
            return p.t, Singleton(np.zeros(d))
        if isinstance(node, VarX):
            return float(p.x[node.index - 1]), singleton_basis(node.index - 1)
        if isinstance(node, VarZ):
            return float(p.z[node.index - 1]), singleton_basis(n + node.index - 1)
        if isinstance(node, Neg):
            v, s = rec(node.arg)
            return -v, negate(s)
        if isinstance(node, Add):
            v1, s1 = rec(node.left)
            v2, s2 = rec(node.right)
            return v1 + v2, _msum(s1, s2)
        if isinstance(node, Sub):
            v1, s1 = rec(node.left)
            v2, s2 = rec(node.right)
            return v1 - v2, _msum(s1, negate(s2))
        if isinstance(node, Mul):
            v1, s1 = rec(node.left)
            v2, s2 = rec(node.right)
            if isinstance(node.left, Const):
                return v1 * v2, _scale_signed(v1, s2)
            if isinstance(node.right, Const):
                return v1 * v2, _scale_signed(v2, s1)
            g1 = _as_gradient(s1)
            g2 = _as_gradient(s2)
            return v1 * v2, Singleton(v1 * g2 + v2 * g1)
        if isinstance(node, Div):
            v1, s1 = rec(node.left)
            v2, s2 = rec(node.right)
            if v2 == 0.0:
                raise DomainError("division by zero", p.t)
            g1 = _as_gradient(s1)
            g2 = _as_gradient(s2)
            return v1 / v2, Singleton((g1 * v2 - v1 * g2) / (v2 * v2))
        if isinstance(node, Pow):
            v, s = rec(node.base)
            g = _as_gradient(s)
            k = node.exponent
            return v ** k, Singleton(k * v ** (k - 1) * g)
        if isinstance(node, Sin):
            v, s = rec(node.arg)
            return float(np.sin(v)), Singleton(float(np.cos(v)) * _as_gradient(s))
        if isinstance(node, Cos):
            v, s = rec(node.arg)
            return float(np.cos(v)), Singleton(-float(np.sin(v)) * _as_gradient(s))
        if isinstance(node, Exp):
            v, s = rec(node.arg)
            ev = float(np.exp(v))
            return ev, Singleton(ev * _as_gradient(s))
        if isinstance(node, Sqrt):
            v, s = rec(node.arg)
            if v < 0.0:
                raise DomainError("sqrt of a negative value", p.t)
            if v == 0.0:
                raise DomainError("sqrt not differentiable at 0", p.t)
            r = float(np.sqrt(v))
            return r, Singleton(_as_gradient(s) / (2.0 * r))
        if isinstance(node, Abs):
            v, s = rec(node.arg)
            act = tol_act * (1.0 + abs(v))
            if v > act:
                return v, s
            if v < -act:
                return -v, negate(s)
            verts = np.vstack([_hull_vertices(s), _hull_vertices(negate(s))])
            return abs(v), Polytope(verts)
        if isinstance(node, Max):
            pairs = [rec(a) for a in node.args]
            vals = np.array([v for v, _ in pairs])
            vmax = float(vals.max())
            act = tol_act * (1.0 + abs(vmax))
            active = [s for (v, s), va in zip(pairs, vals) if va >= vmax - act]
            if len(active) == 1:
                return vmax, active[0]
            verts = np.vstack([_hull_vertices(s) for s in active])
            return vmax, Polytope(verts)
        if isinstance(node, Norm):
            pairs = [rec(a) for a in node.args]
            vals = np.array([v for v, _ in pairs])
            rows = np.vstack([_as_gradient(s, context="norm") for _, s in pairs])
            nrm = float(np.linalg.norm(vals))
            act = tol_act * (1.0 + nrm)
            if nrm > act:
                return nrm, Singleton(rows.T @ (vals / nrm))
            return nrm, _coordinate_ball(rows, d)
        raise TypeError(f"not an Expr: {node!r}")

    return rec(e)


def subdiff_expr(e: Expr, p: EvalPoint, tol_act: float = 1e-9) -> ConvexSet:
    """Convex subdifferential of the integrand at p, as a set in R^(2n).

    tol_act decides activity: a branch counts as tied when it is within
    tol_act * (1 + |value|) of the deciding value.
    """
    _, s = _value_and_set(e, p, tol_act)
    return s


def directional_derivative(e: Expr, p: EvalPoint, g: np.ndarray,
                           tol_act: float = 1e-9) -> float:
    """f'(p; g) = max over the subdifferential of <v, g>, g in R^(2n)."""
    s = subdiff_expr(e, p, tol_act)
    val, _ = support(s, np.asarray(g, float))
    return val
