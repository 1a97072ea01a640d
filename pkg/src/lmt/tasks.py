"""Synthetic benchmark generators: interval scheduling and housing choice.

Two families of seed-reproducible datasets exercise the whole pipeline.
The scheduling task places activity intervals in continuous time under
soft Allen-style relations and duration preferences; the housing task is
a weighted constraint satisfaction problem over candidate locations with
mixed Boolean and numeric attributes. Gold outputs are produced by the
solver itself under hidden ground-truth weights (carried as the soft
weights of the generated Problem), with a re-solve check that regenerates
any example whose optimum is not unique.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .costs import CostKind, SoftConstraint
from .errors import GenerationError, LmtError
from .formulas import (
    And,
    BoolAtom,
    Formula,
    Implies,
    LinAtom,
    Not,
    Relop,
    Sort,
    Value,
    Variable,
    bool_var,
    conj,
    disj,
    evaluate,
    lvar,
    neg,
    rat_var,
)
from .learning import Example, hamming_loss
from .solver import Problem, Solution, solve_maxsmt, solve_omt

_ZERO = Fraction(0)


# ----------------------------------------------------------------------
# Allen-style interval relations

@dataclass(frozen=True)
class Interval:
    name: str
    start: Variable
    end: Variable

    @staticmethod
    def make(name: str) -> "Interval":
        return Interval(name, rat_var(f"{name}.start"), rat_var(f"{name}.end"))


class ItlKind(Enum):
    BEFORE = "before"
    AFTER = "after"
    OVERLAPS = "overlaps"
    DURING = "during"
    EQUAL = "equal"


@dataclass(frozen=True)
class ItlRelation:
    kind: ItlKind
    a: Interval
    b: Interval

    def __post_init__(self):
        if self.a == self.b:
            raise LmtError("interval relation needs two distinct intervals")


def itl_compile(rel: ItlRelation) -> list[Formula]:
    """Linear-arithmetic constraints for one interval relation.

    Strict inequalities throughout, matching the partition of Allen's
    relations (meeting endpoints are not `before`).
    """
    a, b = rel.a, rel.b
    if rel.kind is ItlKind.BEFORE:
        return [LinAtom(lvar(a.end) - lvar(b.start), Relop.LT, 0)]
    if rel.kind is ItlKind.AFTER:
        return itl_compile(ItlRelation(ItlKind.BEFORE, b, a))
    if rel.kind is ItlKind.OVERLAPS:
        return [
            LinAtom(lvar(a.start) - lvar(b.start), Relop.LT, 0),
            LinAtom(lvar(b.start) - lvar(a.end), Relop.LT, 0),
            LinAtom(lvar(a.end) - lvar(b.end), Relop.LT, 0),
        ]
    if rel.kind is ItlKind.DURING:
        return [
            LinAtom(lvar(b.start) - lvar(a.start), Relop.LT, 0),
            LinAtom(lvar(a.end) - lvar(b.end), Relop.LT, 0),
        ]
    if rel.kind is ItlKind.EQUAL:
        return [
            LinAtom(lvar(a.start) - lvar(b.start), Relop.EQ, 0),
            LinAtom(lvar(a.end) - lvar(b.end), Relop.EQ, 0),
        ]
    raise LmtError(f"unknown interval relation kind: {rel.kind}")


def itl_formula(rel: ItlRelation) -> Formula:
    return conj(*itl_compile(rel))


# ----------------------------------------------------------------------
# Shared generator plumbing

def _solve_auto(problem: Problem) -> Solution:
    if all(s.kind == CostKind.BOOLEAN for s in problem.soft):
        return solve_maxsmt(problem)
    return solve_omt(problem)


def _unique_gold(problem: Problem, evidence, block: Callable[[dict], Formula],
                 min_gap: Fraction = _ZERO):
    """Solve under evidence; also report whether the optimum pattern is unique.

    `block` maps the found assignment to a hard formula excluding its
    pattern; a second solve at the same objective value means a tie.
    A positive `min_gap` additionally rejects optima whose margin over the
    runner-up pattern is thinner than the gap, which keeps gold outputs
    stable under small weight perturbations.
    """
    base = Problem(problem.variables, problem.boxes, problem.hard, problem.soft, evidence)
    sol = _solve_auto(base)
    if sol.status != "optimum":
        return None, False
    blocked = Problem(
        problem.variables, problem.boxes,
        problem.hard + (block(sol.assignment),), problem.soft, evidence,
    )
    sol2 = _solve_auto(blocked)
    unique = sol2.status != "optimum" or sol2.objective > sol.objective + min_gap
    return sol, unique


def _soft_pattern_block(softs: Sequence[SoftConstraint]) -> Callable[[dict], Formula]:
    def block(assignment: dict) -> Formula:
        flipped = []
        for s in softs:
            if evaluate(s.formula, assignment):
                flipped.append(neg(s.formula))
            else:
                flipped.append(s.formula)
        return disj(*flipped)

    return block


def _bool_pattern_block(vars_: Sequence[Variable]) -> Callable[[dict], Formula]:
    def block(assignment: dict) -> Formula:
        flipped = [
            Not(BoolAtom(v)) if assignment[v] else BoolAtom(v) for v in vars_
        ]
        return disj(*flipped)

    return block


# ----------------------------------------------------------------------
# Activity scheduling

@dataclass
class ActivityConfig:
    n_activities: int = 4
    horizon: int = 24
    n_itl_softs: int = 6
    n_duration_softs: int = 0
    n_gap_softs: int = 0
    n_examples: int = 10
    n_observed: int = 2
    noise: Fraction = _ZERO
    weight_choices: tuple = (1, 2, 3, 4, 5)
    min_gap: Fraction = _ZERO
    max_retries: int = 80


def gen_activity_dataset(config: ActivityConfig, seed: int) -> tuple[Problem, list[Example]]:
    """Scheduling dataset: soft interval relations, observed start times.

    Gold schedules are solver outputs under the sampled ground-truth
    weights (stored as the problem's soft weights); the evidence is the
    observed start times, jittered by at most `noise` before conditioning,
    so gold == infer(true weights, evidence) holds exactly.
    """
    if config.horizon <= 0:
        raise GenerationError("horizon must be positive")
    if config.n_activities < 2:
        raise GenerationError("need at least two activities")
    rng = random.Random(seed)
    intervals = [Interval.make(f"act{i}") for i in range(config.n_activities)]
    variables = []
    boxes = {}
    for iv in intervals:
        variables += [iv.start, iv.end]
        boxes[iv.start] = (_ZERO, Fraction(config.horizon))
        boxes[iv.end] = (_ZERO, Fraction(config.horizon))
    hard = tuple(
        LinAtom(lvar(iv.start) - lvar(iv.end), Relop.LT, 0) for iv in intervals
    )

    # Some relation libraries are too degenerate to admit unique optima;
    # when example generation stalls, resample the whole library.
    for _library_attempt in range(12):
        softs = _sample_activity_softs(config, rng, intervals)
        problem = Problem(tuple(variables), boxes, hard, tuple(softs))
        observed = sorted(
            rng.sample([iv.start for iv in intervals], config.n_observed),
            key=lambda v: v.name,
        )
        examples = _activity_examples(config, rng, problem, observed, softs)
        if examples is not None:
            return problem, examples
    raise GenerationError("could not generate a unique-optimum schedule")


def _sample_activity_softs(config: ActivityConfig, rng: random.Random,
                           intervals: list[Interval]) -> list[SoftConstraint]:
    softs: list[SoftConstraint] = []
    seen_rel = set()
    kinds = list(ItlKind)
    tries = 0
    while len(softs) < config.n_itl_softs:
        tries += 1
        if tries > 50 * config.n_itl_softs:
            raise GenerationError("could not sample enough distinct relations")
        i, j = rng.sample(range(len(intervals)), 2)
        kind = rng.choice(kinds)
        if (kind, i, j) in seen_rel:
            continue
        seen_rel.add((kind, i, j))
        rel = ItlRelation(kind, intervals[i], intervals[j])
        w = Fraction(rng.choice(config.weight_choices))
        softs.append(SoftConstraint(f"itl{len(softs)}", itl_formula(rel), CostKind.BOOLEAN, w))
    for k in range(config.n_duration_softs):
        iv = intervals[k % len(intervals)]
        d = Fraction(rng.randint(1, max(1, config.horizon // 2)))
        f = LinAtom(lvar(iv.end) - lvar(iv.start), Relop.EQ, d)
        w = Fraction(rng.choice(config.weight_choices))
        softs.append(SoftConstraint(f"dur{k}", f, CostKind.LINEAR, w))
    for k in range(config.n_gap_softs):
        i, j = rng.sample(range(len(intervals)), 2)
        g = Fraction(rng.randint(1, max(1, config.horizon // 3)))
        f = LinAtom(lvar(intervals[j].start) - lvar(intervals[i].end), Relop.LE, g)
        w = Fraction(rng.choice(config.weight_choices))
        softs.append(SoftConstraint(f"gap{k}", f, CostKind.LINEAR, w))
    return softs


def _activity_examples(config: ActivityConfig, rng: random.Random, problem: Problem,
                       observed, softs) -> list[Example] | None:
    block = _soft_pattern_block(softs)
    noise = Fraction(config.noise)
    examples: list[Example] = []
    for _ in range(config.n_examples):
        for _attempt in range(config.max_retries):
            evidence = {}
            for v in observed:
                anchor = Fraction(rng.randint(0, config.horizon - 1))
                if noise:
                    jitter = Fraction(rng.randint(-1, 1)) * noise
                    anchor = min(max(anchor + jitter, _ZERO), Fraction(config.horizon))
                evidence[v] = anchor
            sol, unique = _unique_gold(problem, evidence, block, Fraction(config.min_gap))
            if sol is not None and unique:
                gold = {v: sol.assignment[v] for v in problem.variables if v not in evidence}
                examples.append(Example(evidence, gold))
                break
        else:
            return None
    return examples


# ----------------------------------------------------------------------
# Housing choice

@dataclass
class HousingConfig:
    n_locations: int = 3
    price_range: tuple = (0, 20)
    dist_range: tuple = (0, 20)
    crime_range: tuple = (0, 10)
    transit_range: tuple = (0, 10)
    budget: int = 12
    dmax: int = 8
    cmax: int = 4
    tmin: int = 6
    garden_p: float = 0.5
    school_p: float = 0.5
    n_examples: int = 10
    weight_choices: tuple = (1, 2, 3, 4, 5)
    min_gap: Fraction = _ZERO
    max_retries: int = 80


@dataclass
class HousingInstance:
    problem: Problem
    selects: list[Variable]
    attr_vars: dict[str, list[Variable]]
    derived: dict[str, Variable]


def make_housing_problem(config: HousingConfig, rng: random.Random) -> HousingInstance:
    """The shared housing Problem: selection Booleans, derived attributes,
    exactly-one hard constraints, and six weighted preferences."""
    L = config.n_locations
    if L < 2:
        raise GenerationError("need at least two locations")
    numeric = {
        "price": config.price_range,
        "dist": config.dist_range,
        "crime": config.crime_range,
        "transit": config.transit_range,
    }
    attr_vars: dict[str, list[Variable]] = {name: [] for name in numeric}
    attr_vars["garden"] = []
    attr_vars["school"] = []
    selects = []
    variables: list[Variable] = []
    boxes = {}
    for i in range(L):
        for name, rng_ in numeric.items():
            v = rat_var(f"{name}{i}")
            attr_vars[name].append(v)
            variables.append(v)
            boxes[v] = (Fraction(rng_[0]), Fraction(rng_[1]))
        for name in ("garden", "school"):
            v = bool_var(f"{name}{i}")
            attr_vars[name].append(v)
            variables.append(v)
    derived = {}
    for name, rng_ in numeric.items():
        v = rat_var(f"sel_{name}")
        derived[name] = v
        variables.append(v)
        boxes[v] = (Fraction(rng_[0]), Fraction(rng_[1]))
    for i in range(L):
        v = bool_var(f"select{i}")
        selects.append(v)
        variables.append(v)

    hard: list[Formula] = [disj(*(BoolAtom(s) for s in selects))]
    for i in range(L):
        for j in range(i + 1, L):
            hard.append(Not(And([BoolAtom(selects[i]), BoolAtom(selects[j])])))
    for i in range(L):
        for name in numeric:
            tie = LinAtom(lvar(derived[name]) - lvar(attr_vars[name][i]), Relop.EQ, 0)
            hard.append(Implies(BoolAtom(selects[i]), tie))

    w = lambda: Fraction(rng.choice(config.weight_choices))
    softs = (
        SoftConstraint("budget", LinAtom(lvar(derived["price"]), Relop.LE, config.budget),
                       CostKind.LINEAR, w()),
        SoftConstraint("distance", LinAtom(lvar(derived["dist"]), Relop.LE, config.dmax),
                       CostKind.LINEAR, w()),
        SoftConstraint("safety", LinAtom(lvar(derived["crime"]), Relop.LE, config.cmax),
                       CostKind.LINEAR, w()),
        SoftConstraint("transit", LinAtom(lvar(derived["transit"]), Relop.GE, config.tmin),
                       CostKind.LINEAR, w()),
        SoftConstraint("garden", conj(*(Implies(BoolAtom(selects[i]), BoolAtom(attr_vars["garden"][i]))
                                        for i in range(L))), CostKind.BOOLEAN, w()),
        SoftConstraint("school", conj(*(Implies(BoolAtom(selects[i]), BoolAtom(attr_vars["school"][i]))
                                        for i in range(L))), CostKind.BOOLEAN, w()),
    )
    problem = Problem(tuple(variables), boxes, tuple(hard), softs)
    return HousingInstance(problem, selects, attr_vars, derived)


def gen_housing_dataset(config: HousingConfig, seed: int) -> tuple[Problem, list[Example]]:
    """Housing dataset: per-example market attributes, gold selections.

    Evidence carries the sampled location attributes; gold is the solver's
    choice under the ground-truth weights plus the derived attribute
    values it forces. Examples whose optimum ties are regenerated.
    """
    rng = random.Random(seed)
    numeric = ("price", "dist", "crime", "transit")
    for _weights_attempt in range(12):
        inst = make_housing_problem(config, rng)
        problem = inst.problem
        block = _bool_pattern_block(inst.selects)
        examples: list[Example] | None = []
        for _ in range(config.n_examples):
            for _attempt in range(config.max_retries):
                evidence: dict[Variable, Value] = {}
                for name in numeric:
                    for v in inst.attr_vars[name]:
                        lo, hi = problem.boxes[v]
                        evidence[v] = Fraction(rng.randint(int(lo), int(hi)))
                for v in inst.attr_vars["garden"]:
                    evidence[v] = rng.random() < config.garden_p
                for v in inst.attr_vars["school"]:
                    evidence[v] = rng.random() < config.school_p
                sol, unique = _unique_gold(problem, evidence, block, Fraction(config.min_gap))
                if sol is not None and unique:
                    gold = {v: sol.assignment[v] for v in problem.variables if v not in evidence}
                    examples.append(Example(evidence, gold))
                    break
            else:
                examples = None
                break
        if examples is not None:
            return problem, examples
    raise GenerationError("could not generate a unique-optimum housing example")


# ----------------------------------------------------------------------
# Prediction metrics

@dataclass
class Metrics:
    mean_hamming: Fraction
    bool_accuracy: Fraction
    mae: Fraction
    exact_recovery: Fraction

    def lines(self) -> list[str]:
        return [
            f"mean_hamming={self.mean_hamming}",
            f"bool_accuracy={self.bool_accuracy}",
            f"mae={self.mae}",
            f"exact_recovery={self.exact_recovery}",
        ]


def evaluate_predictions(preds: Sequence[Mapping[Variable, Value]],
                         golds: Sequence[Mapping[Variable, Value]],
                         tau=_ZERO) -> Metrics:
    """Mean Hamming loss, Boolean accuracy, rational MAE, exact recovery."""
    if len(preds) != len(golds):
        raise LmtError("prediction and gold lists differ in length")
    if not preds:
        raise LmtError("no predictions to evaluate")
    tau = Fraction(tau)
    total_h = _ZERO
    exact = 0
    bool_total = bool_right = 0
    rat_total = 0
    abs_err = _ZERO
    for pred, gold in zip(preds, golds):
        h = hamming_loss(gold, pred, tau)
        total_h += h
        exact += h == 0
        for v, gval in gold.items():
            if v.sort is Sort.BOOL:
                bool_total += 1
                bool_right += pred[v] == gval
            else:
                rat_total += 1
                abs_err += abs(Fraction(pred[v]) - Fraction(gval))
    n = len(preds)
    return Metrics(
        mean_hamming=Fraction(total_h, n),
        bool_accuracy=Fraction(bool_right, bool_total) if bool_total else Fraction(1),
        mae=Fraction(abs_err, rat_total) if rat_total else _ZERO,
        exact_recovery=Fraction(exact, n),
    )
