"""Max-margin weight learning with a cutting-plane working set.

The trainer learns nonnegative soft-constraint weights from example pairs
(evidence, gold output) by margin rescaling: prediction is the world
minimizing the weighted violation cost, and every training round asks the
solver for the most violated margin constraint (loss-augmented inference),
adds it to a working set, and re-solves a small quadratic program.

Sign convention: the engine works with costs, so compatibility is
-w . Psi and a margin row reads  w . (Psi(x,y') - Psi(x,y_gold)) >= loss - xi.
All margin bookkeeping (violations, slacks, termination) is done in exact
rationals against the current rounded weights; floats only live inside
the QP.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

from .costs import CostKind, SoftConstraint, feature_map
from .errors import Infeasible, LmtError, TrainingDataInfeasible
from .formulas import (
    BoolAtom,
    LinAtom,
    Not,
    Relop,
    Sort,
    Value,
    Variable,
    as_rat,
    disj,
    lvar,
)
from .qp import QpRow, solve_qp
from .solver import Problem, Solution, solve_maxsmt, solve_omt

_ZERO = Fraction(0)
WEIGHT_DENOMINATOR_LIMIT = 10**6


@dataclass(frozen=True)
class Example:
    """One training pair: evidence over inputs, gold over outputs."""

    evidence: Mapping[Variable, Value]
    gold: Mapping[Variable, Value]

    def __post_init__(self):
        overlap = set(self.evidence) & set(self.gold)
        if overlap:
            raise LmtError(
                f"evidence and gold overlap on {sorted(v.name for v in overlap)}"
            )

    def world(self) -> dict[Variable, Value]:
        z = dict(self.evidence)
        z.update(self.gold)
        return z

    def check_against(self, problem: Problem) -> None:
        declared = set(problem.variables)
        covered = set(self.evidence) | set(self.gold)
        if covered != declared:
            missing = sorted(v.name for v in declared - covered)
            extra = sorted(v.name for v in covered - declared)
            raise LmtError(f"example does not partition the variables (missing {missing}, extra {extra})")
        for v, val in self.gold.items():
            if v.sort is Sort.RATIONAL:
                lo, hi = problem.boxes[v]
                if not (lo <= val <= hi):
                    raise LmtError(f"gold value for {v.name} is outside its box")


@dataclass
class CutRow:
    """One working-set constraint: example i versus a competing output."""

    example: int
    yprime: dict[Variable, Value]
    delta_psi: tuple[Fraction, ...]  # Psi(x_i, y') - Psi(x_i, y_i)
    loss: Fraction


@dataclass
class TrainingLog:
    rounds: list[dict] = field(default_factory=list)
    passes: int = 0
    qp_objectives: list[float] = field(default_factory=list)
    post_check_excess: Fraction = _ZERO
    qp_monotonic: bool = True

    def to_text(self) -> str:
        lines = []
        for r in self.rounds:
            lines.append(
                "pass={pass} example={example} added={added} loss={loss} "
                "violation={violation} rows={rows} qp_objective={qp:.9g}".format(
                    qp=r["qp_objective"], **r
                )
            )
        lines.append(f"passes={self.passes}")
        lines.append(f"post_check_excess={self.post_check_excess}")
        lines.append(f"qp_monotonic={str(self.qp_monotonic).lower()}")
        return "\n".join(lines) + "\n"


@dataclass
class ModelWeights:
    """Learned weights by soft-constraint id, plus the hyperparameters."""

    weights: dict[str, Fraction]
    C: Fraction
    eps: Fraction
    tau: Fraction = _ZERO
    log: TrainingLog | None = None

    def vector(self, problem: Problem) -> list[Fraction]:
        return [self.weights[s.id] for s in problem.soft]


def _weight_vector(weights, problem: Problem) -> list[Fraction]:
    if isinstance(weights, ModelWeights):
        return weights.vector(problem)
    if isinstance(weights, Mapping):
        return [as_rat(weights[s.id]) for s in problem.soft]
    w = [as_rat(x) for x in weights]
    if len(w) != len(problem.soft):
        raise LmtError(f"{len(w)} weights for {len(problem.soft)} soft constraints")
    return w


def _with_weights(problem: Problem, w: Sequence[Fraction], evidence) -> Problem:
    softs = tuple(replace(s, weight=wj) for s, wj in zip(problem.soft, w))
    return Problem(problem.variables, problem.boxes, problem.hard, softs, evidence)


def _solve(problem: Problem, timeout=None) -> Solution:
    if all(s.kind == CostKind.BOOLEAN for s in problem.soft):
        return solve_maxsmt(problem, timeout)
    return solve_omt(problem, timeout)


def infer(weights, problem: Problem, evidence: Mapping[Variable, Value],
          timeout=None) -> dict[Variable, Value]:
    """Most compatible output: argmin over y of the total violation cost."""
    w = _weight_vector(weights, problem)
    solution = _solve(_with_weights(problem, w, dict(evidence)), timeout)
    if solution.status != "optimum":
        raise Infeasible("hard constraints plus evidence are unsatisfiable")
    return {v: solution.assignment[v] for v in problem.variables if v not in evidence}


def hamming_loss(gold: Mapping[Variable, Value], pred: Mapping[Variable, Value],
                 tau=_ZERO) -> Fraction:
    """Count of outputs where prediction and gold disagree.

    Rational coordinates disagree when |gold - pred| > tau (tau defaults
    to 0, i.e. exact mismatch counts).
    """
    if set(gold) != set(pred):
        raise LmtError("hamming_loss: assignments cover different variables")
    tau = as_rat(tau)
    loss = 0
    for v, gval in gold.items():
        pval = pred[v]
        if v.sort is Sort.BOOL:
            loss += gval != pval
        else:
            loss += abs(as_rat(gval) - as_rat(pval)) > tau
    return Fraction(loss)


def _sep_prefix(problem: Problem) -> str:
    prefix = "_sep"
    ids = [s.id for s in problem.soft]
    while any(i.startswith(prefix) for i in ids):
        prefix += "_"
    return prefix


def separation_oracle(weights, problem: Problem, example: Example, tau=_ZERO,
                      timeout=None):
    """Most violated margin constraint for one example.

    Returns (y', loss, Psi(x, y')). Implemented as a single solver call:
    the original softs carry the current weights, and each output variable
    contributes a unit-weight Boolean-cost soft that is satisfied exactly
    when the variable disagrees with the gold value, so minimizing total
    cost minimizes  w . Psi - loss  (up to a constant).
    """
    w = _weight_vector(weights, problem)
    tau = as_rat(tau)
    softs = list(replace(s, weight=wj) for s, wj in zip(problem.soft, w))
    prefix = _sep_prefix(problem)
    outputs = [v for v in problem.variables if v not in example.evidence]
    for k, v in enumerate(outputs):
        gold = example.gold[v]
        if v.sort is Sort.BOOL:
            formula = Not(BoolAtom(v)) if gold else BoolAtom(v)
        else:
            gold = as_rat(gold)
            formula = disj(
                LinAtom(lvar(v), Relop.LT, gold - tau),
                LinAtom(lvar(v), Relop.GT, gold + tau),
            )
        softs.append(SoftConstraint(f"{prefix}{k}", formula, CostKind.BOOLEAN, Fraction(1)))
    augmented = Problem(problem.variables, problem.boxes, problem.hard,
                        tuple(softs), dict(example.evidence))
    solution = _solve(augmented, timeout)
    if solution.status != "optimum":
        raise Infeasible("hard constraints plus evidence are unsatisfiable")
    yprime = {v: solution.assignment[v] for v in outputs}
    loss = hamming_loss(example.gold, yprime, tau)
    psi = feature_map(list(problem.soft), solution.assignment)
    return yprime, loss, psi


def solve_reduced_qp(rows: Sequence[CutRow], C, n: int, dim: int):
    """Solve the working-set QP; returns (w, xi, gap) as floats."""
    qrows = [QpRow(r.example, tuple(float(d) for d in r.delta_psi), float(r.loss))
             for r in rows]
    res = solve_qp(qrows, float(C), n, dim)
    return res.w, res.xi, res.gap


def _round_weights(w: Sequence[float]) -> list[Fraction]:
    out = []
    for x in w:
        f = Fraction(x).limit_denominator(WEIGHT_DENOMINATOR_LIMIT)
        out.append(f if f > 0 else _ZERO)
    return out


def _slacks(w: Sequence[Fraction], rows: Sequence[CutRow], n: int) -> list[Fraction]:
    xi = [_ZERO] * n
    for r in rows:
        margin = r.loss - sum(wj * d for wj, d in zip(w, r.delta_psi))
        if margin > xi[r.example]:
            xi[r.example] = margin
    return xi


def _canonical(y: Mapping[Variable, Value]) -> tuple:
    return tuple(sorted(((v.name, str(val)) for v, val in y.items())))


def train(problem: Problem, examples: Sequence[Example], C, eps, tau=_ZERO,
          max_passes: int = 200) -> ModelWeights:
    """n-slack cutting-plane training.

    Repeats passes over the examples, asking the separation oracle for the
    most violated constraint of each; constraints violated by more than
    xi_i + eps join the working set and the reduced QP is re-solved. Stops
    when a full pass adds nothing, which by construction leaves no
    constraint violated beyond xi_i + eps.
    """
    if not examples:
        raise LmtError("training needs at least one example")
    C = as_rat(C)
    eps = as_rat(eps)
    tau = as_rat(tau)
    if C <= 0:
        raise ValueError("C must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = len(examples)
    m = len(problem.soft)
    for i, ex in enumerate(examples):
        ex.check_against(problem)

    gold_psi = [feature_map(list(problem.soft), ex.world()) for ex in examples]
    rows: list[CutRow] = []
    seen: set[tuple] = set()
    w = [_ZERO] * m
    log = TrainingLog()
    last_qp = 0.0

    for pass_no in range(1, max_passes + 1):
        log.passes = pass_no
        added_this_pass = 0
        xi = _slacks(w, rows, n)
        for i, ex in enumerate(examples):
            try:
                yprime, loss, psi = separation_oracle(w, problem, ex, tau)
            except Infeasible:
                raise TrainingDataInfeasible(i)
            delta_psi = tuple(a - b for a, b in zip(psi, gold_psi[i]))
            violation = loss - sum(wj * d for wj, d in zip(w, delta_psi))
            added = False
            if violation > xi[i] + eps:
                key = (i, _canonical(yprime))
                if key not in seen:
                    seen.add(key)
                    rows.append(CutRow(i, yprime, delta_psi, loss))
                    qp_w, qp_xi, _gap = solve_reduced_qp(rows, C, n, m)
                    qp_obj = _qp_objective(qp_w, qp_xi, C, n)
                    if qp_obj < last_qp - 1e-7 * max(1.0, abs(last_qp)):
                        log.qp_monotonic = False
                    assert qp_obj >= last_qp - 1e-7 * max(1.0, abs(last_qp)), \
                        "reduced QP objective decreased"
                    last_qp = qp_obj
                    log.qp_objectives.append(qp_obj)
                    w = _round_weights(qp_w)
                    xi = _slacks(w, rows, n)
                    added = True
                    added_this_pass += 1
            log.rounds.append({
                "pass": pass_no,
                "example": i,
                "added": int(added),
                "loss": str(loss),
                "violation": str(violation),
                "rows": len(rows),
                "qp_objective": last_qp,
            })
        if added_this_pass == 0:
            break
    else:
        raise LmtError(f"training did not terminate in {max_passes} passes")

    # Post-hoc certificate: one more separation pass must find nothing
    # violated beyond xi_i + eps (+ a hair of solver tolerance).
    xi = _slacks(w, rows, n)
    worst = _ZERO
    for i, ex in enumerate(examples):
        yprime, loss, psi = separation_oracle(w, problem, ex, tau)
        delta_psi = tuple(a - b for a, b in zip(psi, gold_psi[i]))
        violation = loss - sum(wj * d for wj, d in zip(w, delta_psi))
        excess = violation - (xi[i] + eps)
        if excess > worst:
            worst = excess
    log.post_check_excess = worst
    if worst > Fraction(1, 10**9):
        raise LmtError(f"termination certificate failed: excess {worst}")

    weights = {s.id: wj for s, wj in zip(problem.soft, w)}
    return ModelWeights(weights=weights, C=C, eps=eps, tau=tau, log=log)


def _qp_objective(w: Sequence[float], xi: Sequence[float], C, n: int) -> float:
    return 0.5 * sum(x * x for x in w) + float(C) / n * sum(xi)
