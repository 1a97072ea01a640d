"""Independent brute-force oracles and random instance generators.

Everything here deliberately avoids the engine's search and encoding
paths: satisfiability is decided by enumerating atom polarities and
Boolean worlds, optima by enumerating candidate vertices, so agreement
with the solver is meaningful evidence.
"""

from __future__ import annotations

import itertools
import random
from fractions import Fraction

from lmt.costs import CostKind, SoftConstraint, total_cost
from lmt.formulas import (
    And,
    BoolAtom,
    Const,
    Formula,
    Iff,
    Implies,
    LinAtom,
    LinExpr,
    Not,
    Or,
    Relop,
    Sort,
    bool_var,
    evaluate,
    rat_var,
    relop_holds,
)
from lmt.lra import LinCon, LinSystem, feasible
from lmt.solver import Problem

F = Fraction
COMPLEMENT = {
    Relop.LT: Relop.GE, Relop.LE: Relop.GT, Relop.EQ: Relop.NE,
    Relop.GE: Relop.LT, Relop.GT: Relop.LE, Relop.NE: Relop.EQ,
}


# ----------------------------------------------------------------------
# Random formulas and assignments

def random_linexpr(rng: random.Random, rats, max_vars=2) -> LinExpr:
    n = rng.randint(1, min(max_vars, len(rats)))
    vs = rng.sample(rats, n)
    coeffs = {}
    for v in vs:
        c = 0
        while c == 0:
            c = rng.randint(-2, 2)
        coeffs[v] = F(c)
    return LinExpr(coeffs)


def random_atom_pool(rng: random.Random, rats, size, ops=None):
    ops = ops or list(Relop)
    pool = []
    for _ in range(size):
        expr = random_linexpr(rng, rats)
        op = rng.choice(ops)
        rhs = F(rng.randint(-5, 5))
        pool.append(LinAtom(expr, op, rhs))
    return pool


def random_formula(rng: random.Random, bools, atom_pool, depth=2) -> Formula:
    if depth == 0 or rng.random() < 0.35:
        if bools and (not atom_pool or rng.random() < 0.5):
            leaf: Formula = BoolAtom(rng.choice(bools))
        else:
            leaf = rng.choice(atom_pool)
        return Not(leaf) if rng.random() < 0.3 else leaf
    kind = rng.choice(["and", "or", "not", "implies", "iff"])
    if kind == "not":
        return Not(random_formula(rng, bools, atom_pool, depth - 1))
    a = random_formula(rng, bools, atom_pool, depth - 1)
    b = random_formula(rng, bools, atom_pool, depth - 1)
    if kind == "and":
        return And([a, b])
    if kind == "or":
        return Or([a, b])
    if kind == "implies":
        return Implies(a, b)
    return Iff(a, b)


def random_assignment(rng: random.Random, variables) -> dict:
    sigma = {}
    for v in variables:
        if v.sort is Sort.BOOL:
            sigma[v] = rng.random() < 0.5
        else:
            sigma[v] = F(rng.randint(-40, 40), rng.randint(1, 4))
    return sigma


# ----------------------------------------------------------------------
# Abstract evaluation: truth from Boolean values plus atom polarities

def eval_abstract(f: Formula, bools: dict, pol: dict) -> bool:
    if isinstance(f, Const):
        return f.value
    if isinstance(f, BoolAtom):
        return bools[f.var]
    if isinstance(f, LinAtom):
        if not f.expr.coeffs:
            return relop_holds(f.op, F(0), f.rhs)
        return pol[f]
    if isinstance(f, Not):
        return not eval_abstract(f.child, bools, pol)
    if isinstance(f, And):
        return all(eval_abstract(c, bools, pol) for c in f.children)
    if isinstance(f, Or):
        return any(eval_abstract(c, bools, pol) for c in f.children)
    if isinstance(f, Implies):
        return (not eval_abstract(f.lhs, bools, pol)) or eval_abstract(f.rhs, bools, pol)
    if isinstance(f, Iff):
        return eval_abstract(f.lhs, bools, pol) == eval_abstract(f.rhs, bools, pol)
    raise TypeError(f)


def collect_atoms(f: Formula) -> set[LinAtom]:
    if isinstance(f, LinAtom):
        return {f} if f.expr.coeffs else set()
    if isinstance(f, Not):
        return collect_atoms(f.child)
    if isinstance(f, (And, Or)):
        out = set()
        for c in f.children:
            out |= collect_atoms(c)
        return out
    if isinstance(f, (Implies, Iff)):
        return collect_atoms(f.lhs) | collect_atoms(f.rhs)
    return set()


def polarity_feasible(literals, box) -> bool:
    """Conjunction of signed atoms decidable by LP; distinct is case-split."""
    plain = []
    splits = []
    for atom, sign in literals:
        op = atom.op if sign else COMPLEMENT[atom.op]
        if op is Relop.NE:
            splits.append((atom.expr, atom.rhs))
        else:
            plain.append(LinCon.from_atom(LinAtom(atom.expr, op, atom.rhs)))

    def expand(i, cons):
        if i == len(splits):
            system = LinSystem(cons, dict(box), tuple(box))
            return feasible(system) is not None
        expr, rhs = splits[i]
        return any(
            expand(i + 1, cons + [LinCon.from_atom(LinAtom(expr, op, rhs))])
            for op in (Relop.LT, Relop.GT)
        )

    return expand(0, plain)


def brute_force_maxsmt(problem: Problem):
    """Exact MAX-SMT optimum by polarity and world enumeration, or None.

    Enumerates every theory-consistent polarity vector over the distinct
    comparison atoms, then every Boolean world, and takes the cheapest
    hard-satisfying combination.
    """
    formulas = list(problem.hard) + [s.formula for s in problem.soft]
    atoms = sorted(
        set().union(*(collect_atoms(f) for f in formulas)) if formulas else set(),
        key=repr,
    )
    bools = [v for v in problem.variables if v.sort is Sort.BOOL]
    box = problem.boxes
    best = None
    for bits in itertools.product([False, True], repeat=len(atoms)):
        literals = list(zip(atoms, bits))
        if atoms and not polarity_feasible(literals, box):
            continue
        pol = dict(zip(atoms, bits))
        for world_bits in itertools.product([False, True], repeat=len(bools)):
            world = dict(zip(bools, world_bits))
            if not all(eval_abstract(h, world, pol) for h in problem.hard):
                continue
            cost = sum(
                (s.weight * s.scale for s in problem.soft
                 if not eval_abstract(s.formula, world, pol)),
                F(0),
            )
            if best is None or cost < best:
                best = cost
    return best


# ----------------------------------------------------------------------
# Piecewise-linear OMT oracle over 1-2 rational variables

def _atom_lines(formulas):
    lines = []
    for f in formulas:
        for atom in collect_atoms(f):
            lines.append((atom.expr.coeffs, atom.rhs))
    return lines


def _solve2(l1, l2, vs):
    (a1, b1), (a2, b2) = l1, l2
    x, y = vs
    a11, a12 = a1.get(x, F(0)), a1.get(y, F(0))
    a21, a22 = a2.get(x, F(0)), a2.get(y, F(0))
    det = a11 * a22 - a12 * a21
    if det == 0:
        return None
    return ((b1 * a22 - a12 * b2) / det, (a11 * b2 - b1 * a21) / det)


def omt_candidates(problem: Problem):
    """Vertex candidates: atom-boundary intersections and box corners."""
    rats = [v for v in problem.variables if v.sort is Sort.RATIONAL]
    formulas = list(problem.hard) + [s.formula for s in problem.soft]
    lines = _atom_lines(formulas)
    box = problem.boxes
    points = []
    if len(rats) == 1:
        x = rats[0]
        lo, hi = box[x]
        vals = {lo, hi}
        for coeffs, rhs in lines:
            a = coeffs.get(x, F(0))
            if a != 0:
                vals.add(rhs / a)
        points = [{x: val} for val in vals if lo <= val <= hi]
    elif len(rats) == 2:
        x, y = rats
        (xlo, xhi), (ylo, yhi) = box[x], box[y]
        all_lines = lines + [
            ({x: F(1)}, xlo), ({x: F(1)}, xhi),
            ({y: F(1)}, ylo), ({y: F(1)}, yhi),
        ]
        for l1, l2 in itertools.combinations(all_lines, 2):
            pt = _solve2(l1, l2, (x, y))
            if pt is None:
                continue
            px, py = pt
            if xlo <= px <= xhi and ylo <= py <= yhi:
                points.append({x: px, y: py})
    else:
        raise ValueError("oracle supports 1 or 2 rational variables")
    return points


def brute_force_omt(problem: Problem):
    """Exact linear-cost OMT optimum by candidate-vertex enumeration."""
    weights = [s.weight for s in problem.soft]
    softs = list(problem.soft)
    best = None
    for pt in omt_candidates(problem):
        if not all(evaluate(h, pt) for h in problem.hard):
            continue
        cost = total_cost(weights, softs, pt)
        if best is None or cost < best:
            best = cost
    return best


def pl_min_1d(problem: Problem):
    """1-D oracle that also handles Or inside linear costs.

    Candidates include crossings of every pair of hinge arms, where a
    min of pieces can dip.
    """
    (x,) = [v for v in problem.variables if v.sort is Sort.RATIONAL]
    lo, hi = problem.boxes[x]
    arms = [(F(0), F(0))]  # the flat zero arm
    vals = {lo, hi}
    for s in problem.soft:
        for atom in collect_atoms(s.formula):
            a = atom.expr.coeffs.get(x, F(0))
            c = atom.rhs
            if a != 0:
                vals.add(c / a)
            arms.append((a, -c))
            arms.append((-a, c))
    for h in problem.hard:
        for atom in collect_atoms(h):
            a = atom.expr.coeffs.get(x, F(0))
            if a != 0:
                vals.add(atom.rhs / a)
    for (a1, b1), (a2, b2) in itertools.combinations(arms, 2):
        if a1 != a2:
            vals.add((b2 - b1) / (a1 - a2))
    weights = [s.weight for s in problem.soft]
    softs = list(problem.soft)
    best = None
    for val in sorted(vals):
        if not (lo <= val <= hi):
            continue
        pt = {x: val}
        if not all(evaluate(h, pt) for h in problem.hard):
            continue
        cost = total_cost(weights, softs, pt)
        if best is None or cost < best:
            best = cost
    return best


# ----------------------------------------------------------------------
# LP vertex-enumeration oracle (2 variables, non-strict rows)

def lp_vertex_minimum(obj: LinExpr, system: LinSystem):
    """Exact minimum by enumerating candidate vertices, or None."""
    vs = list(system.variables)
    assert len(vs) == 2
    x, y = vs
    (xlo, xhi), (ylo, yhi) = system.box[x], system.box[y]
    lines = [
        ({x: F(1)}, xlo), ({x: F(1)}, xhi),
        ({y: F(1)}, ylo), ({y: F(1)}, yhi),
    ]
    for con in system.constraints:
        lines.append((con.expr.coeffs, con.bound.real - con.expr.constant))
    best = None
    for l1, l2 in itertools.combinations(lines, 2):
        pt = _solve2(l1, l2, (x, y))
        if pt is None:
            continue
        px, py = pt
        if not (xlo <= px <= xhi and ylo <= py <= yhi):
            continue
        witness = {x: px, y: py}
        ok = True
        for con in system.constraints:
            val = con.expr.evaluate(witness)
            bound = con.bound.real
            if con.op is Relop.LE and not val <= bound:
                ok = False
            elif con.op is Relop.GE and not val >= bound:
                ok = False
            elif con.op is Relop.EQ and val != bound:
                ok = False
            if not ok:
                break
        if not ok:
            continue
        val = obj.evaluate(witness)
        if best is None or val < best:
            best = val
    return best


# ----------------------------------------------------------------------
# Exhaustive loss-augmented separation (Boolean outputs only)

def brute_force_separation(weights, problem: Problem, example, tau=F(0)):
    """Optimal separation objective min_y (w . Psi(y) - loss(y)), exactly."""
    from lmt.costs import feature_map
    from lmt.learning import hamming_loss

    outputs = [v for v in problem.variables if v not in example.evidence]
    assert all(v.sort is Sort.BOOL for v in outputs)
    best = None
    for bits in itertools.product([False, True], repeat=len(outputs)):
        world = dict(example.evidence)
        world.update(zip(outputs, bits))
        if not all(evaluate(h, world) for h in problem.hard):
            continue
        psi = feature_map(list(problem.soft), world)
        yprime = dict(zip(outputs, bits))
        loss = hamming_loss(example.gold, yprime, tau)
        score = sum((w * p for w, p in zip(weights, psi)), F(0)) - loss
        if best is None or score < best:
            best = score
    return best


# ----------------------------------------------------------------------
# Random problem generators for the acceptance batches

def random_maxsmt_problem(rng: random.Random) -> Problem:
    nb = rng.randint(1, 8)
    nr = rng.randint(0, 3)
    bools = [bool_var(f"b{i}") for i in range(nb)]
    rats = [rat_var(f"r{i}") for i in range(nr)]
    boxes = {v: (F(-10), F(10)) for v in rats}
    pool = random_atom_pool(rng, rats, rng.randint(2, 5)) if rats else []
    n_formulas = rng.randint(2, 10)
    n_hard = rng.randint(0, min(3, n_formulas - 1))
    hard = []
    soft = []
    for k in range(n_formulas):
        f = random_formula(rng, bools, pool, depth=rng.randint(1, 2))
        if k < n_hard:
            hard.append(f)
        else:
            w = F(rng.randint(1, 5))
            soft.append(SoftConstraint(f"s{k}", f, CostKind.BOOLEAN, w))
    return Problem(tuple(bools + rats), boxes, tuple(hard), tuple(soft))


def random_omt_problem(rng: random.Random) -> Problem:
    nr = rng.randint(1, 2)
    rats = [rat_var(f"r{i}") for i in range(nr)]
    boxes = {v: (F(rng.randint(-8, -2)), F(rng.randint(2, 8))) for v in rats}
    nonstrict = [Relop.LE, Relop.GE, Relop.EQ]
    anyop = [Relop.LT, Relop.LE, Relop.EQ, Relop.GE, Relop.GT]
    hard = []
    for _ in range(rng.randint(0, 2)):
        atoms = random_atom_pool(rng, rats, 2, ops=nonstrict)
        hard.append(atoms[0] if rng.random() < 0.6 else Or(atoms))
    soft = []
    for k in range(rng.randint(1, 4)):
        atoms = random_atom_pool(rng, rats, rng.randint(1, 2), ops=anyop)
        f: Formula = atoms[0] if len(atoms) == 1 else And(atoms)
        soft.append(SoftConstraint(f"s{k}", f, CostKind.LINEAR, F(rng.randint(1, 5))))
    return Problem(tuple(rats), boxes, tuple(hard), tuple(soft))


def random_separation_instance(rng: random.Random):
    from lmt.learning import Example

    nb = rng.randint(2, 10)
    bools = [bool_var(f"b{i}") for i in range(nb)]
    n_evidence = rng.randint(0, nb // 3)
    hard = []
    if rng.random() < 0.4:
        hard.append(Or([BoolAtom(b) for b in rng.sample(bools, min(3, nb))]))
    soft = []
    for k in range(rng.randint(1, 6)):
        f = random_formula(rng, bools, [], depth=rng.randint(1, 2))
        soft.append(SoftConstraint(f"s{k}", f, CostKind.BOOLEAN, F(rng.randint(1, 5))))
    problem = Problem(tuple(bools), {}, tuple(hard), tuple(soft))
    evid_vars = rng.sample(bools, n_evidence)
    evidence = {v: rng.random() < 0.5 for v in evid_vars}
    gold = {v: rng.random() < 0.5 for v in bools if v not in evidence}
    weights = [F(rng.randint(0, 4)) for _ in soft]
    return weights, problem, Example(evidence, gold)
