"""Exact feasibility and linear optimization over rational constraints.

Conjunctions of linear constraints (with strict inequalities) are decided
by a dense two-phase simplex over exact rationals. Strict bounds ride on
a symbolic infinitesimal: a bound is a DeltaRational `r + d*delta`, ordered
lexicographically, so `e < c` is solved as `e <= c - delta`. Witnesses are
concretized back to plain rationals by picking a small enough positive
value for delta before they leave this module.

Bland's rule everywhere: slow, terminating, and bit-for-bit deterministic.
Every variable must carry finite box bounds, which keeps every instance
bounded and makes brute-force oracles possible in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from gmpy2 import mpq

from .errors import LmtError
from .formulas import LinAtom, LinExpr, Relop, Variable, as_rat

# The tableau runs on gmpy2 rationals (C implementation, ~10x faster than
# fractions.Fraction); everything entering or leaving this module is a
# plain Fraction.
_ZERO = mpq(0)
_ONE = mpq(1)


def _q(x) -> mpq:
    return mpq(x.numerator, x.denominator) if isinstance(x, Fraction) else mpq(x)


def _fr(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


@dataclass(frozen=True)
class DeltaRational:
    """r + d*delta for an infinitesimal positive delta; lexicographic order."""

    real: Fraction
    delta: Fraction = Fraction(0)

    def __add__(self, other):
        other = _as_dr(other)
        return DeltaRational(self.real + other.real, self.delta + other.delta)

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_dr(other)
        return DeltaRational(self.real - other.real, self.delta - other.delta)

    def __rsub__(self, other):
        return _as_dr(other) - self

    def __neg__(self):
        return DeltaRational(-self.real, -self.delta)

    def __mul__(self, k: Fraction):
        return DeltaRational(self.real * k, self.delta * k)

    __rmul__ = __mul__

    def __truediv__(self, k: Fraction):
        return DeltaRational(self.real / k, self.delta / k)

    def __lt__(self, other):
        other = _as_dr(other)
        return (self.real, self.delta) < (other.real, other.delta)

    def __le__(self, other):
        other = _as_dr(other)
        return (self.real, self.delta) <= (other.real, other.delta)

    def __gt__(self, other):
        return _as_dr(other) < self

    def __ge__(self, other):
        return _as_dr(other) <= self

    def concretize(self, delta_value: Fraction) -> Fraction:
        return self.real + self.delta * delta_value

    def __repr__(self):
        if self.delta == 0:
            return str(self.real)
        return f"{self.real}{'+' if self.delta > 0 else ''}{self.delta}d"


def _as_dr(x) -> DeltaRational:
    if isinstance(x, DeltaRational):
        return x
    return DeltaRational(as_rat(x))


DR_ZERO = DeltaRational(_ZERO)


@dataclass(frozen=True)
class LinCon:
    """expr (<= | >= | =) bound, with a possibly infinitesimal bound."""

    expr: LinExpr
    op: Relop
    bound: DeltaRational

    def __post_init__(self):
        if self.op not in (Relop.LE, Relop.GE, Relop.EQ):
            raise ValueError(f"LinCon op must be <=, >= or =, got {self.op}")

    @staticmethod
    def from_atom(atom: LinAtom) -> "LinCon":
        """Encode a comparison atom; strict ops gain a -/+ delta margin."""
        c = atom.rhs
        if atom.op is Relop.LT:
            return LinCon(atom.expr, Relop.LE, DeltaRational(c, Fraction(-1)))
        if atom.op is Relop.LE:
            return LinCon(atom.expr, Relop.LE, DeltaRational(c))
        if atom.op is Relop.GT:
            return LinCon(atom.expr, Relop.GE, DeltaRational(c, Fraction(1)))
        if atom.op is Relop.GE:
            return LinCon(atom.expr, Relop.GE, DeltaRational(c))
        if atom.op is Relop.EQ:
            return LinCon(atom.expr, Relop.EQ, DeltaRational(c))
        raise LmtError("distinct atoms must be case-split before the LP layer")


@dataclass
class LinSystem:
    """A conjunction of linear constraints plus mandatory finite boxes."""

    constraints: list[LinCon]
    box: dict[Variable, tuple[Fraction, Fraction]]
    variables: tuple[Variable, ...] = ()

    def __post_init__(self):
        if not self.variables:
            self.variables = tuple(sorted(self.box, key=lambda v: v.name))
        for v in self.variables:
            if v not in self.box:
                raise LmtError(f"{v.name} has no box bounds")
            lo, hi = self.box[v]
            if lo > hi:
                raise LmtError(f"empty box for {v.name}: [{lo}, {hi}]")
        known = set(self.variables)
        for con in self.constraints:
            missing = con.expr.variables - known
            if missing:
                raise LmtError(
                    f"constraint uses unboxed variables {sorted(v.name for v in missing)}"
                )


@dataclass
class LpSolution:
    """Solution of one (possibly lexicographic) LP solve."""

    values: list[Fraction]  # concrete objective values at the witness
    witness: dict[Variable, Fraction]
    delta_value: DeltaRational | None = None  # first objective, pre-concretization


@dataclass
class LpOptimum:
    value: Fraction
    witness: dict[Variable, Fraction]


class _Tableau:
    """Dense simplex tableau; Fraction coefficients, DeltaRational rhs."""

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.rows: list[list[Fraction]] = []
        self.rhs: list[DeltaRational] = []
        self.basis: list[int] = []

    def pivot(self, r: int, c: int) -> None:
        row = self.rows[r]
        inv = _ONE / row[c]
        self.rows[r] = prow = [a * inv for a in row]
        self.rhs[r] = prhs = self.rhs[r] * inv
        for i in range(len(self.rows)):
            if i == r:
                continue
            f = self.rows[i][c]
            if f != 0:
                self.rows[i] = [a - f * b for a, b in zip(self.rows[i], prow)]
                self.rhs[i] = self.rhs[i] - prhs * f
        self.basis[r] = c

    def optimize(self, cost: list[Fraction]) -> DeltaRational:
        """Minimize cost^T x with Bland's rule; returns the optimal value.

        Assumes boundedness, which holds here because every structural
        variable carries explicit box rows.
        """
        zrow = list(cost)
        zval = DR_ZERO
        for i, b in enumerate(self.basis):
            cb = cost[b]
            if cb != 0:
                zrow = [a - cb * t for a, t in zip(zrow, self.rows[i])]
                zval = zval + self.rhs[i] * cb
        while True:
            enter = -1
            for j in range(self.ncols):
                if zrow[j] < 0:
                    enter = j
                    break
            if enter < 0:
                return zval
            leave = -1
            best: DeltaRational | None = None
            for i, row in enumerate(self.rows):
                a = row[enter]
                if a > 0:
                    ratio = self.rhs[i] / a
                    if best is None or ratio < best or (
                        ratio == best and self.basis[i] < self.basis[leave]
                    ):
                        best = ratio
                        leave = i
            if leave < 0:
                raise LmtError("unbounded LP despite box bounds")
            coeff = zrow[enter]
            self.pivot(leave, enter)
            zrow = [a - coeff * t for a, t in zip(zrow, self.rows[leave])]
            zval = zval + self.rhs[leave] * coeff

    def drop_columns_from(self, col: int) -> None:
        self.rows = [row[:col] for row in self.rows]
        self.ncols = col

    def append_row(self, coeffs: list[Fraction], rhs: DeltaRational) -> None:
        """Add `coeffs . x + s == rhs` with a fresh slack s entering the basis.

        The row is reduced against the current basis first, so the caller
        must ensure the reduced rhs is nonnegative (true when the current
        point satisfies the row with equality).
        """
        new_col = self.ncols
        self.ncols += 1
        for row in self.rows:
            row.append(_ZERO)
        row = list(coeffs) + [_ZERO] * (self.ncols - len(coeffs))
        row[new_col] = _ONE
        for i, b in enumerate(self.basis):
            f = row[b]
            if f != 0:
                row = [a - f * x for a, x in zip(row, self.rows[i])]
                rhs = rhs - self.rhs[i] * f
        if rhs < DR_ZERO:
            raise LmtError("appended row is violated at the current vertex")
        self.rows.append(row)
        self.rhs.append(rhs)
        self.basis.append(new_col)

    def solution(self, nstruct: int) -> list[DeltaRational]:
        vals = [DR_ZERO] * nstruct
        for i, b in enumerate(self.basis):
            if b < nstruct:
                vals[b] = self.rhs[i]
        return vals


def _normal_rows(sys: LinSystem):
    """All constraints as `sum a_j * u_j <= beta` over shifted u = x - lo."""
    vs = sys.variables
    index = {v: j for j, v in enumerate(vs)}
    lows = [_q(sys.box[v][0]) for v in vs]
    rows = []

    def add_le(expr: LinExpr, bound: DeltaRational, sign: int):
        a = [_ZERO] * len(vs)
        shift = _q(expr.constant) * sign
        for v, c in expr.coeffs.items():
            j = index[v]
            q = _q(c) * sign
            a[j] = q
            shift += q * lows[j]
        beta = DeltaRational(_q(bound.real) * sign - shift, _q(bound.delta) * sign)
        rows.append((a, beta))

    for con in sys.constraints:
        if con.op in (Relop.LE, Relop.EQ):
            add_le(con.expr, con.bound, 1)
        if con.op in (Relop.GE, Relop.EQ):
            add_le(con.expr, con.bound, -1)
    for j, v in enumerate(vs):
        lo, hi = sys.box[v]
        a = [_ZERO] * len(vs)
        a[j] = _ONE
        rows.append((a, DeltaRational(_q(hi) - _q(lo))))
    return rows


def _concretization_delta(rows, u: list[DeltaRational]) -> Fraction:
    """Half the largest delta keeping every `<=` row concretely true."""
    caps: list[Fraction] = []
    n = len(u)
    for a, beta in rows:
        lr = _ZERO
        ld = _ZERO
        for j in range(n):
            c = a[j]
            if c != 0:
                lr += c * u[j].real
                ld += c * u[j].delta
        if lr == beta.real:
            continue  # lex feasibility already gives ld <= beta.delta
        if ld > beta.delta:
            caps.append((beta.real - lr) / (ld - beta.delta))
    for val in u:
        if val.real > 0 and val.delta < 0:
            caps.append(val.real / -val.delta)
    cap = min(caps) if caps else _ONE
    if cap > 1:
        cap = _ONE
    return cap / 2


def solve(sys: LinSystem, objectives: Sequence[LinExpr] = ()) -> LpSolution | None:
    """Feasibility plus optional lexicographic minimization.

    With objectives (o1, o2, ...) the solver minimizes o1, then minimizes
    o2 subject to o1 staying at its optimum, and so on. Returns None when
    the system is infeasible. The witness is an exact rational point that
    satisfies every constraint (strictness included) after delta has been
    replaced by a concrete small positive rational.
    """
    vs = sys.variables
    n = len(vs)
    index = {v: j for j, v in enumerate(vs)}
    for o in objectives:
        for v in o.coeffs:
            if v not in index:
                raise LmtError(f"objective uses unboxed variable {v.name}")
    rows = _normal_rows(sys)
    m = len(rows)

    nart = sum(1 for _, beta in rows if beta < DR_ZERO)
    t = _Tableau(n + m + nart)
    art = n + m
    for i, (a, beta) in enumerate(rows):
        row = [_ZERO] * t.ncols
        slack = n + i
        if beta < DR_ZERO:
            for j, c in enumerate(a):
                row[j] = -c
            row[slack] = -_ONE
            row[art] = _ONE
            t.basis.append(art)
            t.rhs.append(-beta)
            art += 1
        else:
            row[:n] = a
            row[slack] = _ONE
            t.basis.append(slack)
            t.rhs.append(beta)
        t.rows.append(row)

    if nart:
        cost1 = [_ZERO] * (n + m) + [_ONE] * nart
        if t.optimize(cost1) != DR_ZERO:
            return None
        # Clear leftover basic artificials (they sit at zero), then drop
        # redundant rows and the artificial columns altogether.
        keep = []
        for i in range(len(t.rows)):
            if t.basis[i] >= n + m:
                for j in range(n + m):
                    if t.rows[i][j] != 0:
                        t.pivot(i, j)
                        break
            keep.append(i)
        live = [i for i in keep if t.basis[i] < n + m]
        t.rows = [t.rows[i] for i in live]
        t.rhs = [t.rhs[i] for i in live]
        t.basis = [t.basis[i] for i in live]
        t.drop_columns_from(n + m)

    lows = [_q(sys.box[v][0]) for v in vs]
    first_delta_value: DeltaRational | None = None
    for k, o in enumerate(objectives):
        cost = [_ZERO] * t.ncols
        shift = DeltaRational(_q(o.constant), _ZERO)
        for v, c in o.coeffs.items():
            j = index[v]
            cost[j] = _q(c)
            shift = shift + DeltaRational(cost[j] * lows[j], _ZERO)
        val = t.optimize(cost)
        if k == 0:
            first_delta_value = val + shift
        if k < len(objectives) - 1:
            # Pin cost^T u at its optimum (two inequality rows == equality)
            # before minimizing the next objective.
            t.append_row(cost[: t.ncols], val)
            t.append_row([-c for c in cost[: t.ncols]], -val)

    u = t.solution(n)
    delta = _concretization_delta(rows, u)
    witness = {v: _fr(lows[j] + u[j].concretize(delta)) for j, v in enumerate(vs)}
    _recheck_witness(sys, witness)
    values = [o.evaluate(witness) for o in objectives]
    return LpSolution(values=values, witness=witness, delta_value=first_delta_value)


def _recheck_witness(sys: LinSystem, witness) -> None:
    """Exact re-validation of every constraint at the emitted point."""
    for v, val in witness.items():
        lo, hi = sys.box[v]
        if not lo <= val <= hi:
            raise LmtError(f"internal error: witness leaves the box on {v.name}")
    for con in sys.constraints:
        lhs = con.expr.evaluate(witness)
        b = con.bound
        if con.op is Relop.LE:
            ok = lhs < b.real or (lhs == b.real and b.delta >= 0)
        elif con.op is Relop.GE:
            ok = lhs > b.real or (lhs == b.real and b.delta <= 0)
        else:
            ok = lhs == b.real and b.delta == 0
        if not ok:
            raise LmtError("internal error: witness fails a constraint recheck")


def feasible(sys: LinSystem) -> dict[Variable, Fraction] | None:
    """A rational witness satisfying every constraint, or None (Unsat)."""
    sol = solve(sys)
    return sol.witness if sol is not None else None


def minimize(obj: LinExpr, sys: LinSystem) -> LpOptimum | None:
    """Exact minimum of obj over the system, or None when infeasible."""
    sol = solve(sys, [obj])
    if sol is None:
        return None
    return LpOptimum(value=sol.values[0], witness=sol.witness)
