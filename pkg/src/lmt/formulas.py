"""Ground formula ASTs over Boolean and linear-rational variables.

A formula is a finite tree whose leaves are either Boolean variables or
linear-arithmetic comparisons, glued together with the usual connectives.
Everything here is immutable and evaluation is exact: rational values are
`fractions.Fraction`, so strict inequalities and equalities mean what they
say. The only rewrites provided are negation normal form and restriction
by a partial assignment (constant propagation); nothing fancier.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Union

from .errors import SortError, UnboundVariable

Value = Union[bool, Fraction]
Assignment = Mapping["Variable", Value]

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.-]*\Z")


def as_rat(x) -> Fraction:
    """Coerce an int / string / Fraction to an exact rational.

    Floats are rejected on purpose: satisfaction decisions must never
    inherit binary rounding.
    """
    if isinstance(x, bool) or isinstance(x, float):
        raise SortError(f"expected an exact rational, got {x!r}")
    return Fraction(x)


class Sort(Enum):
    BOOL = "Bool"
    RATIONAL = "Rational"


@dataclass(frozen=True)
class Variable:
    name: str
    sort: Sort

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise ValueError(f"bad variable name: {self.name!r}")

    def __repr__(self):
        return self.name


def bool_var(name: str) -> Variable:
    return Variable(name, Sort.BOOL)


def rat_var(name: str) -> Variable:
    return Variable(name, Sort.RATIONAL)


class LinExpr:
    """A linear combination of rational variables plus a constant.

    Zero coefficients are never stored, so structural equality is
    canonical-form equality.
    """

    __slots__ = ("coeffs", "constant")

    def __init__(self, coeffs: Mapping[Variable, object] | None = None, constant=0):
        clean: dict[Variable, Fraction] = {}
        for v, c in (coeffs or {}).items():
            if v.sort is not Sort.RATIONAL:
                raise SortError(f"non-rational variable {v.name} in linear expression")
            c = as_rat(c)
            if c != 0:
                clean[v] = c
        object.__setattr__(self, "coeffs", clean)
        object.__setattr__(self, "constant", as_rat(constant))

    def __setattr__(self, name, value):
        raise AttributeError("LinExpr is immutable")

    @property
    def variables(self) -> set[Variable]:
        return set(self.coeffs)

    def coeff(self, v: Variable) -> Fraction:
        return self.coeffs.get(v, Fraction(0))

    def evaluate(self, sigma: Assignment) -> Fraction:
        total = self.constant
        for v, c in self.coeffs.items():
            try:
                val = sigma[v]
            except KeyError:
                raise UnboundVariable(f"no value for {v.name}") from None
            if isinstance(val, bool) or not isinstance(val, (int, Fraction)):
                raise SortError(f"{v.name} needs a rational value, got {val!r}")
            total += c * val
        return total

    def substitute(self, partial: Assignment) -> "LinExpr":
        coeffs = dict(self.coeffs)
        constant = self.constant
        for v in list(coeffs):
            if v in partial:
                val = partial[v]
                if isinstance(val, bool) or not isinstance(val, (int, Fraction)):
                    raise SortError(f"{v.name} needs a rational value, got {val!r}")
                constant += coeffs.pop(v) * val
        return LinExpr(coeffs, constant)

    def __add__(self, other):
        if isinstance(other, LinExpr):
            coeffs = dict(self.coeffs)
            for v, c in other.coeffs.items():
                coeffs[v] = coeffs.get(v, Fraction(0)) + c
            return LinExpr(coeffs, self.constant + other.constant)
        return LinExpr(self.coeffs, self.constant + as_rat(other))

    __radd__ = __add__

    def __neg__(self):
        return LinExpr({v: -c for v, c in self.coeffs.items()}, -self.constant)

    def __sub__(self, other):
        return self + (-other if isinstance(other, LinExpr) else -as_rat(other))

    def __rsub__(self, other):
        return (-self) + as_rat(other)

    def __mul__(self, k):
        k = as_rat(k)
        return LinExpr({v: c * k for v, c in self.coeffs.items()}, self.constant * k)

    __rmul__ = __mul__

    def __eq__(self, other):
        return (
            isinstance(other, LinExpr)
            and self.coeffs == other.coeffs
            and self.constant == other.constant
        )

    def __hash__(self):
        return hash((frozenset(self.coeffs.items()), self.constant))

    def __repr__(self):
        parts = [f"{c}*{v.name}" for v, c in sorted(self.coeffs.items(), key=lambda p: p[0].name)]
        if self.constant != 0 or not parts:
            parts.append(str(self.constant))
        return " + ".join(parts)


def lvar(v: Variable) -> LinExpr:
    """The expression consisting of a single variable."""
    return LinExpr({v: 1})


class Relop(Enum):
    LT = "<"
    LE = "<="
    EQ = "="
    GE = ">="
    GT = ">"
    NE = "distinct"


_RELOP_FN = {
    Relop.LT: operator.lt,
    Relop.LE: operator.le,
    Relop.EQ: operator.eq,
    Relop.GE: operator.ge,
    Relop.GT: operator.gt,
    Relop.NE: operator.ne,
}

# Complement under negation: not (e < c)  <=>  e >= c, etc.
RELOP_COMPLEMENT = {
    Relop.LT: Relop.GE,
    Relop.LE: Relop.GT,
    Relop.EQ: Relop.NE,
    Relop.GE: Relop.LT,
    Relop.GT: Relop.LE,
    Relop.NE: Relop.EQ,
}


class Formula:
    """Base class for formula nodes."""

    __slots__ = ()


@dataclass(frozen=True, repr=False)
class Const(Formula):
    value: bool

    def __repr__(self):
        return "true" if self.value else "false"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True, repr=False)
class BoolAtom(Formula):
    var: Variable

    def __post_init__(self):
        if self.var.sort is not Sort.BOOL:
            raise SortError(f"{self.var.name} is not a Boolean variable")

    def __repr__(self):
        return self.var.name


@dataclass(frozen=True, repr=False)
class LinAtom(Formula):
    """Comparison `expr relop rhs`, stored with expr.constant == 0."""

    expr: LinExpr
    op: Relop
    rhs: Fraction

    def __init__(self, expr: LinExpr, op: Relop, rhs):
        rhs = as_rat(rhs) - expr.constant
        if expr.constant != 0:
            expr = expr - expr.constant
        object.__setattr__(self, "expr", expr)
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "rhs", rhs)

    def __repr__(self):
        return f"({self.expr} {self.op.value} {self.rhs})"


@dataclass(frozen=True, repr=False)
class Not(Formula):
    child: Formula

    def __repr__(self):
        return f"(not {self.child!r})"


@dataclass(frozen=True, repr=False)
class And(Formula):
    children: tuple[Formula, ...]

    def __init__(self, children: Iterable[Formula]):
        children = tuple(children)
        if len(children) < 2:
            raise ValueError("And needs at least 2 children; use conj() to normalize")
        object.__setattr__(self, "children", children)

    def __repr__(self):
        return "(and " + " ".join(map(repr, self.children)) + ")"


@dataclass(frozen=True, repr=False)
class Or(Formula):
    children: tuple[Formula, ...]

    def __init__(self, children: Iterable[Formula]):
        children = tuple(children)
        if len(children) < 2:
            raise ValueError("Or needs at least 2 children; use disj() to normalize")
        object.__setattr__(self, "children", children)

    def __repr__(self):
        return "(or " + " ".join(map(repr, self.children)) + ")"


@dataclass(frozen=True, repr=False)
class Implies(Formula):
    lhs: Formula
    rhs: Formula

    def __repr__(self):
        return f"(=> {self.lhs!r} {self.rhs!r})"


@dataclass(frozen=True, repr=False)
class Iff(Formula):
    lhs: Formula
    rhs: Formula

    def __repr__(self):
        return f"(iff {self.lhs!r} {self.rhs!r})"


def conj(*children: Formula) -> Formula:
    """And with constant folding; 0 children -> true, 1 child -> the child."""
    kept = []
    for c in children:
        if c is FALSE or (isinstance(c, Const) and not c.value):
            return FALSE
        if isinstance(c, Const):
            continue
        kept.append(c)
    if not kept:
        return TRUE
    if len(kept) == 1:
        return kept[0]
    return And(kept)


def disj(*children: Formula) -> Formula:
    kept = []
    for c in children:
        if isinstance(c, Const):
            if c.value:
                return TRUE
            continue
        kept.append(c)
    if not kept:
        return FALSE
    if len(kept) == 1:
        return kept[0]
    return Or(kept)


def neg(f: Formula) -> Formula:
    """Shallow negation; to_nnf pushes it to the leaves when needed."""
    if isinstance(f, Const):
        return FALSE if f.value else TRUE
    if isinstance(f, Not):
        return f.child
    return Not(f)


def evaluate(f: Formula, sigma: Assignment) -> bool:
    """Classical truth value of `f` under the total assignment `sigma`."""
    if isinstance(f, Const):
        return f.value
    if isinstance(f, BoolAtom):
        try:
            val = sigma[f.var]
        except KeyError:
            raise UnboundVariable(f"no value for {f.var.name}") from None
        if not isinstance(val, bool):
            raise SortError(f"{f.var.name} needs a Boolean value, got {val!r}")
        return val
    if isinstance(f, LinAtom):
        return _RELOP_FN[f.op](f.expr.evaluate(sigma), f.rhs)
    if isinstance(f, Not):
        return not evaluate(f.child, sigma)
    if isinstance(f, And):
        return all(evaluate(c, sigma) for c in f.children)
    if isinstance(f, Or):
        return any(evaluate(c, sigma) for c in f.children)
    if isinstance(f, Implies):
        return (not evaluate(f.lhs, sigma)) or evaluate(f.rhs, sigma)
    if isinstance(f, Iff):
        return evaluate(f.lhs, sigma) == evaluate(f.rhs, sigma)
    raise TypeError(f"not a formula: {f!r}")


def relop_holds(op: Relop, lhs: Fraction, rhs: Fraction) -> bool:
    return _RELOP_FN[op](lhs, rhs)


def to_nnf(f: Formula) -> Formula:
    """Negation normal form.

    Implies/Iff are eliminated, negation is pushed to the leaves, and a
    negated comparison becomes the complementary comparison, so the only
    negative literals left are on Boolean variables.
    """
    return _nnf(f, False)


def _nnf(f: Formula, negated: bool) -> Formula:
    if isinstance(f, Const):
        return Const(f.value != negated)
    if isinstance(f, BoolAtom):
        return Not(f) if negated else f
    if isinstance(f, LinAtom):
        return LinAtom(f.expr, RELOP_COMPLEMENT[f.op], f.rhs) if negated else f
    if isinstance(f, Not):
        return _nnf(f.child, not negated)
    if isinstance(f, And):
        parts = [_nnf(c, negated) for c in f.children]
        return disj(*parts) if negated else conj(*parts)
    if isinstance(f, Or):
        parts = [_nnf(c, negated) for c in f.children]
        return conj(*parts) if negated else disj(*parts)
    if isinstance(f, Implies):
        if negated:
            return conj(_nnf(f.lhs, False), _nnf(f.rhs, True))
        return disj(_nnf(f.lhs, True), _nnf(f.rhs, False))
    if isinstance(f, Iff):
        if negated:
            return disj(
                conj(_nnf(f.lhs, False), _nnf(f.rhs, True)),
                conj(_nnf(f.lhs, True), _nnf(f.rhs, False)),
            )
        return disj(
            conj(_nnf(f.lhs, False), _nnf(f.rhs, False)),
            conj(_nnf(f.lhs, True), _nnf(f.rhs, True)),
        )
    raise TypeError(f"not a formula: {f!r}")


def free_vars(f: Formula) -> set[Variable]:
    if isinstance(f, Const):
        return set()
    if isinstance(f, BoolAtom):
        return {f.var}
    if isinstance(f, LinAtom):
        return set(f.expr.coeffs)
    if isinstance(f, Not):
        return free_vars(f.child)
    if isinstance(f, (And, Or)):
        out: set[Variable] = set()
        for c in f.children:
            out |= free_vars(c)
        return out
    if isinstance(f, (Implies, Iff)):
        return free_vars(f.lhs) | free_vars(f.rhs)
    raise TypeError(f"not a formula: {f!r}")


def restrict(f: Formula, partial: Assignment) -> Formula:
    """Substitute `partial` into `f` and propagate constants.

    The result mentions none of partial's variables, and for every
    completion sigma, evaluate(restrict(f, p), sigma) == evaluate(f, p | sigma).
    """
    if isinstance(f, Const):
        return f
    if isinstance(f, BoolAtom):
        if f.var in partial:
            val = partial[f.var]
            if not isinstance(val, bool):
                raise SortError(f"{f.var.name} needs a Boolean value, got {val!r}")
            return TRUE if val else FALSE
        return f
    if isinstance(f, LinAtom):
        if not any(v in partial for v in f.expr.coeffs):
            return f
        expr = f.expr.substitute(partial)
        if not expr.coeffs:
            return TRUE if _RELOP_FN[f.op](expr.constant, f.rhs) else FALSE
        return LinAtom(expr, f.op, f.rhs)
    if isinstance(f, Not):
        return neg(restrict(f.child, partial))
    if isinstance(f, And):
        return conj(*(restrict(c, partial) for c in f.children))
    if isinstance(f, Or):
        return disj(*(restrict(c, partial) for c in f.children))
    if isinstance(f, Implies):
        lhs = restrict(f.lhs, partial)
        rhs = restrict(f.rhs, partial)
        if isinstance(lhs, Const):
            return rhs if lhs.value else TRUE
        if isinstance(rhs, Const):
            return TRUE if rhs.value else neg(lhs)
        return Implies(lhs, rhs)
    if isinstance(f, Iff):
        lhs = restrict(f.lhs, partial)
        rhs = restrict(f.rhs, partial)
        if isinstance(lhs, Const):
            return rhs if lhs.value else neg(rhs)
        if isinstance(rhs, Const):
            return lhs if rhs.value else neg(lhs)
        return Iff(lhs, rhs)
    raise TypeError(f"not a formula: {f!r}")


def check_total(sigma: Assignment, variables: Iterable[Variable]) -> None:
    """Raise unless sigma covers `variables` with correctly sorted values."""
    for v in variables:
        if v not in sigma:
            raise UnboundVariable(f"no value for {v.name}")
        val = sigma[v]
        if v.sort is Sort.BOOL and not isinstance(val, bool):
            raise SortError(f"{v.name} needs a Boolean value, got {val!r}")
        if v.sort is Sort.RATIONAL and (isinstance(val, bool) or not isinstance(val, (int, Fraction))):
            raise SortError(f"{v.name} needs a rational value, got {val!r}")
