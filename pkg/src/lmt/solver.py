"""Weighted MAX-SMT and OMT over Boolean structure with exact LP leaves.

The solver minimizes the weighted sum of soft-constraint violation costs
subject to hard formulas, a partial evidence assignment, and per-variable
boxes. Architecture: depth-first branch and bound over

  * Boolean variables (declaration order, false before true),
  * the Or structure of hard formulas and asserted Boolean-cost softs,
  * `distinct` atoms (split into < and >),
  * the Or structure inside linear-cost soft formulas
    (pick the disjunct whose violation is charged),

with an exact rational LP at every leaf: per-atom violations of linear
softs become lower-bounded slack variables, so the leaf optimum is the
exact leaf-restricted total cost. Internal nodes are pruned with the sum
of already-incurred weights plus an LP relaxation. Ties are broken toward
the lexicographically smaller Boolean vector (false < true), then toward
the point minimizing the rational variables lexicographically among the
optima, so a Solution is a pure function of the Problem.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import lra
from .costs import CostKind, SoftConstraint, total_cost
from .errors import LmtError, MixedCostKind, SortError
from .formulas import (
    And,
    Assignment,
    Const,
    Formula,
    LinAtom,
    LinExpr,
    Or,
    Relop,
    Sort,
    Value,
    Variable,
    as_rat,
    evaluate,
    free_vars,
    lvar,
    relop_holds,
    restrict,
    to_nnf,
)
from .lra import DR_ZERO, DeltaRational, LinCon, LinSystem

_ZERO = Fraction(0)


@dataclass(frozen=True)
class Problem:
    """One MAX-SMT / OMT instance.

    Every rational variable must carry a finite box; evidence pins a
    subset of the variables before optimization.
    """

    variables: tuple[Variable, ...]
    boxes: Mapping[Variable, tuple[Fraction, Fraction]]
    hard: tuple[Formula, ...] = ()
    soft: tuple[SoftConstraint, ...] = ()
    evidence: Mapping[Variable, Value] | None = None

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "hard", tuple(self.hard))
        object.__setattr__(self, "soft", tuple(self.soft))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise LmtError("duplicate variable names in problem")
        declared = set(self.variables)
        boxes = {}
        for v in self.variables:
            if v.sort is Sort.RATIONAL:
                if v not in self.boxes:
                    raise LmtError(f"rational variable {v.name} has no box bounds")
                lo, hi = self.boxes[v]
                lo, hi = as_rat(lo), as_rat(hi)
                if lo > hi:
                    raise LmtError(f"empty box for {v.name}: [{lo}, {hi}]")
                boxes[v] = (lo, hi)
        object.__setattr__(self, "boxes", boxes)
        ids = [s.id for s in self.soft]
        if len(set(ids)) != len(ids):
            raise LmtError("duplicate soft constraint ids")
        for f in list(self.hard) + [s.formula for s in self.soft]:
            undeclared = free_vars(f) - declared
            if undeclared:
                raise LmtError(
                    f"formula uses undeclared variables {sorted(v.name for v in undeclared)}"
                )
        if self.evidence:
            ev = {}
            for v, val in self.evidence.items():
                if v not in declared:
                    raise LmtError(f"evidence for undeclared variable {v.name}")
                if v.sort is Sort.BOOL:
                    if not isinstance(val, bool):
                        raise SortError(f"evidence for {v.name} must be Boolean")
                    ev[v] = val
                else:
                    ev[v] = as_rat(val)
            object.__setattr__(self, "evidence", ev)

    @property
    def weights(self) -> list[Fraction]:
        return [s.weight for s in self.soft]


@dataclass
class SolveStats:
    nodes: int = 0
    lp_calls: int = 0
    wall_time: float = 0.0
    timed_out: bool = False


@dataclass
class Solution:
    status: str  # "optimum" | "infeasible"
    assignment: dict[Variable, Value] | None
    objective: Fraction | None
    stats: SolveStats


@dataclass
class Branch:
    """Case decisions that reduce one leaf to a plain LP.

    or_choices / abs_sides are keyed by (soft id, path), where path is the
    tuple of child indices from the NNF root of the soft's formula.
    abs_sides maps an equality atom to "ge" (violation e - c) or "le"
    (violation c - e); without a side the encoder emits both rows, which
    a minimizing objective drives to |e - c| on its own.
    """

    booleans: Mapping[Variable, bool] = field(default_factory=dict)
    or_choices: Mapping[tuple[str, tuple], int] = field(default_factory=dict)
    abs_sides: Mapping[tuple[str, tuple], str] = field(default_factory=dict)
    paid: frozenset = frozenset()


class _Timeout(Exception):
    pass


def _slack_prefix(variables) -> str:
    prefix = "_s"
    while any(v.name.startswith(prefix) for v in variables):
        prefix += "_"
    return prefix


def _subst_atoms(f: Formula, partial: Assignment) -> Formula:
    """Substitute rational evidence into atoms without folding to constants.

    Used for linear-cost formulas, where a fully determined atom still
    contributes its (now constant) violation amount.
    """
    if isinstance(f, LinAtom):
        if partial and any(v in partial for v in f.expr.coeffs):
            return LinAtom(f.expr.substitute(partial), f.op, f.rhs)
        return f
    if isinstance(f, And):
        return And([_subst_atoms(c, partial) for c in f.children])
    if isinstance(f, Or):
        return Or([_subst_atoms(c, partial) for c in f.children])
    raise LmtError(f"unexpected node in linear-cost formula: {f!r}")


def _expr_range(expr: LinExpr, box) -> tuple[Fraction, Fraction]:
    lo = expr.constant
    hi = expr.constant
    for v, c in expr.coeffs.items():
        vlo, vhi = box[v]
        if c > 0:
            lo += c * vlo
            hi += c * vhi
        else:
            lo += c * vhi
            hi += c * vlo
    return lo, hi


class _SoftEncoder:
    """Emits slack variables and rows for linear-cost soft constraints."""

    def __init__(self, box, prefix: str):
        self.box = box
        self.prefix = prefix
        self.rows: list[LinCon] = []
        self.slack_box: dict[Variable, tuple[Fraction, Fraction]] = {}
        self.objective: dict[Variable, Fraction] = {}
        self.constant = _ZERO
        self._counter = 0

    def _fresh_slack(self, ub: Fraction) -> Variable:
        s = Variable(f"{self.prefix}{self._counter}", Sort.RATIONAL)
        self._counter += 1
        self.slack_box[s] = (_ZERO, max(ub, _ZERO))
        return s

    def encode(self, key, nnf: Formula, wcoef: Fraction, or_choices, abs_sides) -> None:
        """Charge `wcoef` times the violation of `nnf` under the choices.

        Or nodes without a recorded choice contribute nothing, which keeps
        the encoding an admissible lower bound at interior search nodes;
        at a leaf every Or has a choice and the encoding is exact.
        """
        self._tree(key, nnf, (), wcoef, or_choices, abs_sides)

    def _tree(self, key, f, path, wcoef, or_choices, abs_sides) -> None:
        if isinstance(f, LinAtom):
            self._atom(key, f, path, wcoef, abs_sides)
            return
        if isinstance(f, And):
            for i, c in enumerate(f.children):
                self._tree(key, c, path + (i,), wcoef, or_choices, abs_sides)
            return
        if isinstance(f, Or):
            choice = or_choices.get((key, path))
            if choice is not None:
                self._tree(key, f.children[choice], path + (choice,), wcoef, or_choices, abs_sides)
            return
        raise LmtError(f"unexpected node in linear-cost formula: {f!r}")

    def _atom(self, key, atom: LinAtom, path, wcoef, abs_sides) -> None:
        lo, hi = _expr_range(atom.expr, self.box)
        c = atom.rhs
        if atom.op in (Relop.LT, Relop.LE):
            s = self._fresh_slack(hi - c)
            self.rows.append(LinCon(atom.expr - lvar(s), Relop.LE, DeltaRational(c)))
        elif atom.op in (Relop.GT, Relop.GE):
            s = self._fresh_slack(c - lo)
            self.rows.append(LinCon(-atom.expr - lvar(s), Relop.LE, DeltaRational(-c)))
        elif atom.op is Relop.EQ:
            side = abs_sides.get((key, path))
            s = self._fresh_slack(max(hi - c, c - lo))
            if side in (None, "ge"):
                self.rows.append(LinCon(atom.expr - lvar(s), Relop.LE, DeltaRational(c)))
            if side in (None, "le"):
                self.rows.append(LinCon(-atom.expr - lvar(s), Relop.LE, DeltaRational(-c)))
        else:
            raise LmtError("distinct atom reached the LP encoder")
        self.objective[s] = self.objective.get(s, _ZERO) + wcoef


def compile_objective(
    softs: Sequence[SoftConstraint],
    branch: Branch,
    boxes: Mapping[Variable, tuple[Fraction, Fraction]],
    evidence: Assignment | None = None,
) -> tuple[LinExpr, LinSystem]:
    """Reduce fully decided soft constraints to (objective, LinSystem).

    Linear-cost softs become weighted slack sums lower-bounded by their
    per-atom violations; Boolean-cost softs that the branch decides are
    violated contribute their weights to the objective constant.
    Minimizing the objective over the returned system (intersected with
    the branch's other constraints) equals the leaf-restricted total cost.
    """
    evidence = dict(evidence or {})
    fixed = dict(branch.booleans)
    fixed.update(evidence)
    prefix = _slack_prefix(list(boxes))
    enc = _SoftEncoder(boxes, prefix)
    for s in softs:
        wcoef = s.weight * s.scale
        if s.kind == CostKind.BOOLEAN:
            if s.id in branch.paid:
                enc.constant += wcoef
                continue
            residual = restrict(s.formula, fixed)
            if isinstance(residual, Const):
                if not residual.value:
                    enc.constant += wcoef
            else:
                raise LmtError(
                    f"soft constraint {s.id} is not decided by the branch"
                )
        else:
            nnf = _subst_atoms(s.cost_nnf, evidence)
            enc.encode(s.id, nnf, wcoef, branch.or_choices, branch.abs_sides)
    objective = LinExpr(enc.objective, enc.constant)
    box = dict(boxes)
    box.update(enc.slack_box)
    variables = tuple(boxes) + tuple(enc.slack_box)
    system = LinSystem(enc.rows, box, variables)
    return objective, system


class _Engine:
    def __init__(self, problem: Problem, timeout: float | None):
        self.p = problem
        self.stats = SolveStats()
        # LMT_DEBUG asserts, at every reached leaf, that no interior bound
        # on its path exceeded the leaf value (admissible pruning).
        self.debug = bool(os.environ.get("LMT_DEBUG"))
        self.deadline = None if timeout is None else time.monotonic() + timeout
        self.evidence: dict[Variable, Value] = dict(problem.evidence or {})
        self.bools = [
            v for v in problem.variables if v.sort is Sort.BOOL and v not in self.evidence
        ]
        self.rationals = [
            v for v in problem.variables if v.sort is Sort.RATIONAL and v not in self.evidence
        ]
        self.box = {v: problem.boxes[v] for v in self.rationals}
        self.evidence_ok = all(
            problem.boxes[v][0] <= val <= problem.boxes[v][1]
            for v, val in self.evidence.items()
            if v.sort is Sort.RATIONAL
        )
        self.bool_softs = []
        self.linear_softs = []
        for s in problem.soft:
            if s.kind == CostKind.BOOLEAN:
                # Zero-weight Boolean softs stay in the decision structure:
                # they cannot change the optimum (the pay twin is pruned at
                # equal value), but asserting them first makes the witness
                # prefer satisfying every soft it can for free, so the
                # returned world does not depend on which weights are zero.
                self.bool_softs.append((s, restrict(s.formula, self.evidence)))
            elif s.weight != 0:
                self.linear_softs.append((s, _subst_atoms(s.cost_nnf, self.evidence)))
        self.has_linear = bool(self.linear_softs)
        self.prefix = _slack_prefix(problem.variables)
        self.bool_state: dict[Variable, bool] = {}
        self.best_value: DeltaRational | None = None
        self.best_bools: dict[Variable, bool] | None = None
        self.best_literals: list[LinAtom] | None = None
        self.best_choices: dict | None = None
        self.best_fixed: Fraction | None = None
        self.feas_cache: dict[frozenset, bool] = {}
        # LP value per (literal set, or-choice set): independent of the
        # fixed cost, so assert/pay siblings and repeated subtrees share it.
        self.lp_cache: dict[tuple, DeltaRational | None] = {}
        # Relaxation floor: cheapest conceivable linear-soft cost over the
        # box alone; a constant, admissible addend for interior bounds.
        self.glb = DR_ZERO
        if self.has_linear:
            obj, system = self._lp_parts([], {})
            sol = lra.solve(system, [obj])
            self.stats.lp_calls += 1
            if sol is not None and sol.delta_value is not None:
                self.glb = sol.delta_value

    def _check_time(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            self.stats.timed_out = True
            raise _Timeout

    def run(self) -> Solution:
        t0 = time.monotonic()
        try:
            if self.evidence_ok:
                hard = []
                dead = False
                for h in self.p.hard:
                    r = restrict(h, self.evidence)
                    if isinstance(r, Const):
                        if not r.value:
                            dead = True
                            break
                    else:
                        hard.append(r)
                if not dead:
                    self._bool_dfs(0, hard, self.bool_softs, _ZERO)
        except _Timeout:
            pass
        self.stats.wall_time = time.monotonic() - t0
        if self.best_value is None:
            return Solution("infeasible", None, None, self.stats)
        witness = self._finalize_witness()
        objective = total_cost(self.p.weights, list(self.p.soft), witness)
        for h in self.p.hard:
            if not evaluate(h, witness):
                raise LmtError(f"internal error: witness violates hard constraint {h!r}")
        return Solution("optimum", witness, objective, self.stats)

    # ------------------------------------------------------------------
    # Boolean phase

    def _bool_dfs(self, i: int, hard: list[Formula], bsofts, fixed: Fraction,
                  bounds: tuple = ()):
        self._check_time()
        self.stats.nodes += 1
        bound = self.glb + fixed
        if self.best_value is not None and bound >= self.best_value:
            return
        if self.debug:
            bounds = bounds + (bound,)
        if i == len(self.bools):
            work = [to_nnf(h) for h in reversed(hard)]
            self._theory(work, [], bsofts, {}, fixed, bounds)
            return
        v = self.bools[i]
        for val in (False, True):
            sub = {v: val}
            h2 = []
            dead = False
            for h in hard:
                r = restrict(h, sub)
                if isinstance(r, Const):
                    if not r.value:
                        dead = True
                        break
                else:
                    h2.append(r)
            if dead:
                continue
            fx2 = fixed
            b2 = []
            for s, f in bsofts:
                r = restrict(f, sub)
                if isinstance(r, Const):
                    if not r.value:
                        fx2 += s.weight * s.scale
                else:
                    b2.append((s, r))
            self.bool_state[v] = val
            self._bool_dfs(i + 1, h2, b2, fx2, bounds)
        self.bool_state.pop(v, None)

    # ------------------------------------------------------------------
    # Theory phase: assert hard structure, decide Boolean softs, choose
    # linear-cost disjuncts, then evaluate the leaf LP.

    def _theory(self, work, literals, bsofts, choices, fixed: Fraction,
                bounds: tuple = ()):
        self._check_time()
        self.stats.nodes += 1
        work = list(work)
        literals = list(literals)

        def prune() -> bool:
            nonlocal bounds
            if self.best_value is not None and self.glb + fixed >= self.best_value:
                return True
            bound = self._node_bound(literals, choices, fixed)
            if bound is None:
                return True
            if self.best_value is not None and bound >= self.best_value:
                return True
            if self.debug:
                bounds = bounds + (bound,)
            return False

        while work:
            f = work.pop()
            if isinstance(f, Const):
                if not f.value:
                    return
            elif isinstance(f, LinAtom):
                if not f.expr.coeffs:
                    if not relop_holds(f.op, _ZERO, f.rhs):
                        return
                elif f.op is Relop.NE:
                    if prune():
                        return
                    for op in (Relop.LT, Relop.GT):
                        self._theory(
                            work + [LinAtom(f.expr, op, f.rhs)],
                            literals, bsofts, choices, fixed, bounds,
                        )
                    return
                else:
                    literals.append(f)
            elif isinstance(f, And):
                work.extend(reversed(f.children))
            elif isinstance(f, Or):
                if prune():
                    return
                for child in f.children:
                    self._theory(work + [child], literals, bsofts, choices, fixed, bounds)
                return
            else:
                raise LmtError(f"unexpected node in theory search: {f!r}")
        if bsofts:
            s, f = bsofts[0]
            rest = bsofts[1:]
            if prune():
                return
            self._theory([to_nnf(f)], literals, rest, choices, fixed, bounds)
            self._theory([], literals, rest, choices, fixed + s.weight * s.scale, bounds)
            return
        nxt = self._next_or(choices)
        if nxt is not None:
            key, nchildren = nxt
            if prune():
                return
            for ci in range(nchildren):
                ch2 = dict(choices)
                ch2[key] = ci
                self._theory([], literals, bsofts, ch2, fixed, bounds)
            return
        self._leaf(literals, choices, fixed, bounds)

    def _next_or(self, choices):
        for pos, (s, nnf) in enumerate(self.linear_softs):
            found = self._walk_or(pos, nnf, (), choices)
            if found is not None:
                return found
        return None

    def _walk_or(self, pos, f, path, choices):
        if isinstance(f, Or):
            key = (pos, path)
            if key not in choices:
                return key, len(f.children)
            ci = choices[key]
            return self._walk_or(pos, f.children[ci], path + (ci,), choices)
        if isinstance(f, And):
            for i, c in enumerate(f.children):
                found = self._walk_or(pos, c, path + (i,), choices)
                if found is not None:
                    return found
        return None

    # ------------------------------------------------------------------
    # LP plumbing

    def _lp_parts(self, literals, choices):
        enc = _SoftEncoder(self.box, self.prefix)
        for pos, (s, nnf) in enumerate(self.linear_softs):
            enc.encode(pos, nnf, s.weight * s.scale, choices, {})
        rows = [LinCon.from_atom(a) for a in literals] + enc.rows
        box = dict(self.box)
        box.update(enc.slack_box)
        variables = tuple(self.rationals) + tuple(enc.slack_box)
        system = LinSystem(rows, box, variables)
        objective = LinExpr(enc.objective, enc.constant)
        return objective, system

    def _feasible_literals(self, literals) -> bool:
        key = frozenset(literals)
        cached = self.feas_cache.get(key)
        if cached is None:
            rows = [LinCon.from_atom(a) for a in literals]
            system = LinSystem(rows, dict(self.box), tuple(self.rationals))
            self.stats.lp_calls += 1
            cached = lra.solve(system) is not None
            self.feas_cache[key] = cached
        return cached

    def _lp_value(self, literals, choices) -> DeltaRational | None:
        """Optimal linear-soft cost over the literal cell; None if empty."""
        key = (frozenset(literals), tuple(sorted(choices.items())))
        if key in self.lp_cache:
            return self.lp_cache[key]
        objective, system = self._lp_parts(literals, choices)
        self.stats.lp_calls += 1
        sol = lra.solve(system, [objective])
        value = None if sol is None else sol.delta_value
        self.lp_cache[key] = value
        return value

    def _node_bound(self, literals, choices, fixed: Fraction) -> DeltaRational | None:
        """Admissible lower bound for the subtree; None when it is empty."""
        if not self.has_linear:
            if literals and not self._feasible_literals(literals):
                return None
            return DeltaRational(fixed)
        value = self._lp_value(literals, choices)
        if value is None:
            return None
        return value + fixed

    def _leaf(self, literals, choices, fixed: Fraction, bounds: tuple = ()):
        self._check_time()
        if self.has_linear:
            lp = self._lp_value(literals, choices)
            if lp is None:
                return
            value = lp + fixed
        else:
            if literals and not self._feasible_literals(literals):
                return
            value = DeltaRational(fixed)
        if self.debug:
            assert all(b <= value for b in bounds), "inadmissible interior bound"
        if self.best_value is None or value < self.best_value:
            self._record(value, literals, choices, fixed)

    def _record(self, value, literals, choices, fixed):
        self.best_value = value
        self.best_bools = dict(self.bool_state)
        self.best_literals = list(literals)
        self.best_choices = dict(choices)
        self.best_fixed = fixed

    def _finalize_witness(self) -> dict[Variable, Value]:
        witness: dict[Variable, Value] = dict(self.evidence)
        witness.update(self.best_bools)
        for v in self.bools:
            witness.setdefault(v, False)
        if self.rationals:
            objective, system = self._lp_parts(self.best_literals, self.best_choices)
            objectives = [objective] + [lvar(v) for v in self.rationals]
            self.stats.lp_calls += 1
            sol = lra.solve(system, objectives)
            if sol is None:
                raise LmtError("internal error: incumbent leaf became infeasible")
            for v in self.rationals:
                witness[v] = sol.witness[v]
        return witness


def solve_omt(problem: Problem, timeout: float | None = None) -> Solution:
    """Minimize total weighted violation cost subject to hard constraints."""
    return _Engine(problem, timeout).run()


def solve_maxsmt(problem: Problem, timeout: float | None = None) -> Solution:
    """OMT restricted to Boolean-cost softs (weighted MAX-SMT)."""
    for s in problem.soft:
        if s.kind != CostKind.BOOLEAN:
            raise MixedCostKind(f"soft constraint {s.id} has a linear cost")
    return _Engine(problem, timeout).run()


def check_sat(
    variables: Sequence[Variable],
    boxes: Mapping[Variable, tuple[Fraction, Fraction]],
    hard: Sequence[Formula],
    evidence: Assignment | None = None,
) -> dict[Variable, Value] | None:
    """A hard-satisfying world extending the evidence, or None (Unsat)."""
    problem = Problem(tuple(variables), dict(boxes), tuple(hard), (), evidence)
    solution = solve_omt(problem)
    return solution.assignment if solution.status == "optimum" else None
