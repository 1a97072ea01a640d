"""Per-formula violation costs, the joint feature map, and total cost.

A possible world is scored by how much it violates each soft constraint:
a Boolean cost is the 0/1 indicator of violation, a linear cost is the
piecewise-linear amount of violation of a purely numeric formula. The
feature map collects one cost per soft constraint, and the total cost is
its weighted sum; the model's compatibility function is the negation.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import DimensionError, FormulaNotLinearCostable
from .formulas import (
    And,
    Assignment,
    Formula,
    LinAtom,
    Or,
    Relop,
    as_rat,
    evaluate,
    to_nnf,
)


class CostKind:
    BOOLEAN = "bool"
    LINEAR = "linear"


def is_linear_costable(f: Formula) -> bool:
    """True when `f` fits the linear-cost fragment.

    The fragment is: negation normal form contains only comparison atoms
    with <, <=, =, >= or > (no Boolean leaves, no `distinct`, no
    constants). Negations of =, and Implies/Iff between numeric atoms,
    generally fall outside because their NNF produces `distinct`.
    """
    return _costable(to_nnf(f))


def _costable(f: Formula) -> bool:
    if isinstance(f, LinAtom):
        return f.op is not Relop.NE
    if isinstance(f, (And, Or)):
        return all(_costable(c) for c in f.children)
    return False


@dataclass(frozen=True)
class SoftConstraint:
    """A weighted formula with a declared cost kind.

    `scale` is an optional positive factor multiplied into the cost; the
    file format exposes it so linear costs can be normalized against box
    widths when ranges differ wildly. Default 1.
    """

    id: str
    formula: Formula
    kind: str
    weight: Fraction
    scale: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "weight", as_rat(self.weight))
        object.__setattr__(self, "scale", as_rat(self.scale))
        if self.weight < 0:
            raise ValueError(f"soft constraint {self.id}: weight must be >= 0")
        if self.scale <= 0:
            raise ValueError(f"soft constraint {self.id}: scale must be > 0")
        if self.kind not in (CostKind.BOOLEAN, CostKind.LINEAR):
            raise ValueError(f"soft constraint {self.id}: unknown cost kind {self.kind!r}")
        if self.kind == CostKind.LINEAR:
            nnf = to_nnf(self.formula)
            if not _costable(nnf):
                raise FormulaNotLinearCostable(
                    f"soft constraint {self.id}: formula is outside the linear-cost fragment"
                )
            object.__setattr__(self, "_nnf", nnf)

    def cost(self, z: Assignment) -> Fraction:
        if self.kind == CostKind.BOOLEAN:
            raw = Fraction(boolean_cost(self.formula, z))
        else:
            raw = _lin_cost(self._nnf, z)
        return raw * self.scale

    @property
    def cost_nnf(self) -> Formula:
        """NNF of a linear-cost formula (cached at construction)."""
        return self._nnf


def boolean_cost(f: Formula, z: Assignment) -> int:
    """0 if z satisfies f, 1 otherwise."""
    return 0 if evaluate(f, z) else 1


def linear_cost(f: Formula, z: Assignment) -> Fraction:
    """Amount of violation of a numeric formula at z.

    Per atom: max(e - c, 0) for e < c and e <= c, max(c - e, 0) for
    e > c and e >= c, |e - c| for e = c. Conjunction sums, disjunction
    takes the cheapest disjunct. Zero iff satisfied, except that a strict
    atom sitting exactly on its boundary is violated at cost zero.
    """
    if not is_linear_costable(f):
        raise FormulaNotLinearCostable("formula is outside the linear-cost fragment")
    return _lin_cost(to_nnf(f), z)


def _lin_cost(f: Formula, z: Assignment) -> Fraction:
    if isinstance(f, LinAtom):
        val = f.expr.evaluate(z)
        if f.op in (Relop.LT, Relop.LE):
            return max(val - f.rhs, Fraction(0))
        if f.op in (Relop.GT, Relop.GE):
            return max(f.rhs - val, Fraction(0))
        return abs(val - f.rhs)
    if isinstance(f, And):
        return sum((_lin_cost(c, z) for c in f.children), Fraction(0))
    if isinstance(f, Or):
        return min(_lin_cost(c, z) for c in f.children)
    raise FormulaNotLinearCostable(f"unexpected node in linear cost: {f!r}")


def feature_map(softs: list[SoftConstraint], z: Assignment) -> tuple[Fraction, ...]:
    """One scaled cost per soft constraint, in declared order."""
    return tuple(s.cost(z) for s in softs)


def total_cost(weights, softs: list[SoftConstraint], z: Assignment) -> Fraction:
    """weights . feature_map(softs, z); compatibility is its negation."""
    weights = [as_rat(w) for w in weights]
    if len(weights) != len(softs):
        raise DimensionError(f"{len(weights)} weights for {len(softs)} soft constraints")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be nonnegative")
    phi = feature_map(softs, z)
    return sum((w * p for w, p in zip(weights, phi)), Fraction(0))
