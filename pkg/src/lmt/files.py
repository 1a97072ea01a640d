"""Text formats: problem files, datasets, model files, predictions.

The problem grammar is a small SMT-LIB-flavored s-expression language:

    (declare-bool NAME)
    (declare-real NAME LO HI)
    (assert FORMULA)
    (assert-soft FORMULA :id ID :weight W :cost bool|linear [:scale S])

with connectives `and or not => iff`, comparisons `< <= = >= > distinct`
over `+ - *` arithmetic, and numbers written as integers, decimals, or
p/q rationals. Dataset files hold `(example (given (= var val) ...)
(gold (= var val) ...))` forms; prediction files hold `(prediction
(= var val) ...)` forms. Rationals are always printed exactly, never as
floats. Model files are line-oriented: `#C=`/`#eps=` headers, then
`ID WEIGHT` pairs sorted by id.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .costs import CostKind, SoftConstraint
from .errors import DuplicateId, MissingBounds, ParseError
from .formulas import (
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
    Value,
    Variable,
)
from .learning import Example, ModelWeights
from .sexpr import Sym, position, read_all
from .solver import Problem

_NUMBER_RE = re.compile(r"-?\d+(\.\d+)?(/\d+)?\Z")
_RELOPS = {op.value: op for op in Relop}
_CONNECTIVES = {"and", "or", "not", "=>", "iff"}


def _err(msg: str, node) -> ParseError:
    line, col = position(node)
    return ParseError(msg, line, col)


def parse_number(tok: Sym) -> Fraction:
    if not _NUMBER_RE.match(tok.text):
        raise _err(f"expected a number, got {tok.text!r}", tok)
    return Fraction(tok.text)


def _is_number(node) -> bool:
    return isinstance(node, Sym) and bool(_NUMBER_RE.match(node.text))


class _ProblemReader:
    def __init__(self):
        self.variables: list[Variable] = []
        self.by_name: dict[str, Variable] = {}
        self.boxes: dict[Variable, tuple[Fraction, Fraction]] = {}
        self.hard: list[Formula] = []
        self.soft: list[SoftConstraint] = []

    def declare(self, v: Variable, node) -> None:
        if v.name in self.by_name:
            raise DuplicateId(f"variable {v.name} declared twice", *position(node))
        self.by_name[v.name] = v
        self.variables.append(v)

    def lookup(self, tok: Sym) -> Variable:
        v = self.by_name.get(tok.text)
        if v is None:
            raise _err(f"undeclared variable {tok.text!r}", tok)
        return v

    # -- expressions ---------------------------------------------------

    def expr(self, node) -> LinExpr:
        if isinstance(node, Sym):
            if _is_number(node):
                return LinExpr({}, parse_number(node))
            v = self.lookup(node)
            if v.sort is not Sort.RATIONAL:
                raise _err(f"{v.name} is Boolean; expected a rational term", node)
            return LinExpr({v: 1})
        if not node:
            raise _err("empty arithmetic term", node)
        head = node[0]
        if not isinstance(head, Sym):
            raise _err("malformed arithmetic term", node)
        args = node[1:]
        if head.text == "+":
            if not args:
                raise _err("+ needs arguments", node)
            out = LinExpr({})
            for a in args:
                out = out + self.expr(a)
            return out
        if head.text == "-":
            if not args:
                raise _err("- needs arguments", node)
            if len(args) == 1:
                return -self.expr(args[0])
            out = self.expr(args[0])
            for a in args[1:]:
                out = out - self.expr(a)
            return out
        if head.text == "*":
            if len(args) != 2:
                raise _err("* takes exactly two arguments", node)
            lhs, rhs = self.expr(args[0]), self.expr(args[1])
            if not lhs.coeffs:
                return rhs * lhs.constant
            if not rhs.coeffs:
                return lhs * rhs.constant
            raise _err("nonlinear product of two variable terms", node)
        raise _err(f"unknown arithmetic operator {head.text!r}", head)

    # -- formulas ------------------------------------------------------

    def formula(self, node) -> Formula:
        if isinstance(node, Sym):
            if node.text == "true":
                return Const(True)
            if node.text == "false":
                return Const(False)
            v = self.lookup(node)
            if v.sort is not Sort.BOOL:
                raise _err(f"{v.name} is rational; a bare symbol must be Boolean", node)
            return BoolAtom(v)
        if not node:
            raise _err("empty formula", node)
        head = node[0]
        if not isinstance(head, Sym):
            raise _err("malformed formula", node)
        args = node[1:]
        text = head.text
        if text in _RELOPS:
            if len(args) != 2:
                raise _err(f"{text} takes exactly two arguments", node)
            lhs = self.expr(args[0])
            rhs = self.expr(args[1])
            return LinAtom(lhs - rhs, _RELOPS[text], 0)
        if text == "and" or text == "or":
            if len(args) < 2:
                raise _err(f"{text} needs at least two arguments", node)
            children = [self.formula(a) for a in args]
            return And(children) if text == "and" else Or(children)
        if text == "not":
            if len(args) != 1:
                raise _err("not takes exactly one argument", node)
            return Not(self.formula(args[0]))
        if text == "=>":
            if len(args) != 2:
                raise _err("=> takes exactly two arguments", node)
            return Implies(self.formula(args[0]), self.formula(args[1]))
        if text == "iff":
            if len(args) != 2:
                raise _err("iff takes exactly two arguments", node)
            return Iff(self.formula(args[0]), self.formula(args[1]))
        raise _err(f"unknown connective {text!r}", head)

    # -- top-level forms -----------------------------------------------

    def form(self, node) -> None:
        if not isinstance(node, list) or not node or not isinstance(node[0], Sym):
            raise _err("expected a (command ...) form", node)
        head = node[0].text
        args = node[1:]
        if head == "declare-bool":
            if len(args) != 1 or not isinstance(args[0], Sym):
                raise _err("usage: (declare-bool NAME)", node)
            self.declare(self._mkvar(args[0], Sort.BOOL), node)
        elif head == "declare-real":
            if not args or not isinstance(args[0], Sym):
                raise _err("usage: (declare-real NAME LO HI)", node)
            if len(args) != 3:
                raise MissingBounds(
                    f"rational variable {args[0].text} needs LO and HI bounds",
                    *position(node),
                )
            v = self._mkvar(args[0], Sort.RATIONAL)
            if not (_is_number(args[1]) and _is_number(args[2])):
                raise MissingBounds(
                    f"rational variable {v.name} needs numeric LO and HI bounds",
                    *position(node),
                )
            lo, hi = parse_number(args[1]), parse_number(args[2])
            if lo > hi:
                raise _err(f"empty box for {v.name}: [{lo}, {hi}]", node)
            self.declare(v, node)
            self.boxes[v] = (lo, hi)
        elif head == "assert":
            if len(args) != 1:
                raise _err("usage: (assert FORMULA)", node)
            self.hard.append(self.formula(args[0]))
        elif head == "assert-soft":
            self.soft.append(self._soft(node, args))
        else:
            raise _err(f"unknown command {head!r}", node)

    def _mkvar(self, tok: Sym, sort: Sort) -> Variable:
        try:
            return Variable(tok.text, sort)
        except ValueError as e:
            raise _err(str(e), tok) from None

    def _soft(self, node, args) -> SoftConstraint:
        if not args:
            raise _err("usage: (assert-soft FORMULA :id ID :weight W :cost bool|linear)", node)
        formula = self.formula(args[0])
        opts: dict[str, Sym] = {}
        rest = args[1:]
        if len(rest) % 2 != 0:
            raise _err("assert-soft options must be :key value pairs", node)
        for k, v in zip(rest[::2], rest[1::2]):
            if not isinstance(k, Sym) or not k.text.startswith(":") or not isinstance(v, Sym):
                raise _err("assert-soft options must be :key value pairs", node)
            opts[k.text] = v
        missing = {":id", ":weight", ":cost"} - set(opts)
        if missing:
            raise _err(f"assert-soft is missing {sorted(missing)}", node)
        unknown = set(opts) - {":id", ":weight", ":cost", ":scale"}
        if unknown:
            raise _err(f"unknown assert-soft options {sorted(unknown)}", node)
        weight = parse_number(opts[":weight"])
        if weight < 0:
            raise _err("soft constraint weights must be nonnegative", opts[":weight"])
        kind_text = opts[":cost"].text
        if kind_text not in ("bool", "linear"):
            raise _err(f"cost kind must be bool or linear, got {kind_text!r}", opts[":cost"])
        scale = parse_number(opts[":scale"]) if ":scale" in opts else Fraction(1)
        if scale <= 0:
            raise _err("scale must be positive", opts[":scale"])
        sid = opts[":id"].text
        if any(s.id == sid for s in self.soft):
            raise DuplicateId(f"soft constraint id {sid!r} used twice", *position(node))
        kind = CostKind.BOOLEAN if kind_text == "bool" else CostKind.LINEAR
        try:
            return SoftConstraint(sid, formula, kind, weight, scale)
        except Exception as e:
            raise _err(str(e), node) from None


def parse_problem(text: str) -> Problem:
    """Parse a problem file; errors carry line/column positions."""
    reader = _ProblemReader()
    for node in read_all(text):
        reader.form(node)
    missing = [v.name for v in reader.variables
               if v.sort is Sort.RATIONAL and v not in reader.boxes]
    if missing:
        raise MissingBounds(f"rational variables without bounds: {missing}")
    return Problem(
        tuple(reader.variables), reader.boxes, tuple(reader.hard), tuple(reader.soft)
    )


# ----------------------------------------------------------------------
# Printing

def print_rat(x: Fraction) -> str:
    return str(x)


def print_value(val: Value) -> str:
    if isinstance(val, bool):
        return "true" if val else "false"
    return print_rat(Fraction(val))


def print_expr(expr: LinExpr) -> str:
    terms = []
    for v, c in sorted(expr.coeffs.items(), key=lambda p: p[0].name):
        terms.append(v.name if c == 1 else f"(* {print_rat(c)} {v.name})")
    if expr.constant != 0 or not terms:
        terms.append(print_rat(expr.constant))
    if len(terms) == 1:
        return terms[0]
    return "(+ " + " ".join(terms) + ")"


def print_formula(f: Formula) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, BoolAtom):
        return f.var.name
    if isinstance(f, LinAtom):
        return f"({f.op.value} {print_expr(f.expr)} {print_rat(f.rhs)})"
    if isinstance(f, Not):
        return f"(not {print_formula(f.child)})"
    if isinstance(f, And):
        return "(and " + " ".join(print_formula(c) for c in f.children) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(print_formula(c) for c in f.children) + ")"
    if isinstance(f, Implies):
        return f"(=> {print_formula(f.lhs)} {print_formula(f.rhs)})"
    if isinstance(f, Iff):
        return f"(iff {print_formula(f.lhs)} {print_formula(f.rhs)})"
    raise TypeError(f"not a formula: {f!r}")


def print_problem(problem: Problem) -> str:
    lines = []
    for v in problem.variables:
        if v.sort is Sort.BOOL:
            lines.append(f"(declare-bool {v.name})")
        else:
            lo, hi = problem.boxes[v]
            lines.append(f"(declare-real {v.name} {print_rat(lo)} {print_rat(hi)})")
    for h in problem.hard:
        lines.append(f"(assert {print_formula(h)})")
    for s in problem.soft:
        kind = "bool" if s.kind == CostKind.BOOLEAN else "linear"
        opt = f" :scale {print_rat(s.scale)}" if s.scale != 1 else ""
        lines.append(
            f"(assert-soft {print_formula(s.formula)} :id {s.id} "
            f":weight {print_rat(s.weight)} :cost {kind}{opt})"
        )
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Datasets

def _binding(node, by_name: dict[str, Variable]) -> tuple[Variable, Value]:
    ok = (
        isinstance(node, list) and len(node) == 3
        and isinstance(node[0], Sym) and node[0].text == "="
        and isinstance(node[1], Sym) and isinstance(node[2], Sym)
    )
    if not ok:
        raise _err("expected (= var value)", node)
    name, val = node[1], node[2]
    v = by_name.get(name.text)
    if v is None:
        raise _err(f"undeclared variable {name.text!r}", name)
    if val.text in ("true", "false"):
        if v.sort is not Sort.BOOL:
            raise _err(f"{v.name} is rational but bound to a Boolean", val)
        return v, val.text == "true"
    if v.sort is not Sort.RATIONAL:
        raise _err(f"{v.name} is Boolean but bound to a number", val)
    return v, parse_number(val)


def parse_data(text: str, problem: Problem) -> list[Example]:
    """Parse a dataset file of (example (given ...) (gold ...)) forms."""
    by_name = {v.name: v for v in problem.variables}
    examples = []
    for node in read_all(text):
        ok = (
            isinstance(node, list) and len(node) == 3
            and isinstance(node[0], Sym) and node[0].text == "example"
            and all(isinstance(part, list) and part and isinstance(part[0], Sym)
                    for part in node[1:])
            and node[1][0].text == "given" and node[2][0].text == "gold"
        )
        if not ok:
            raise _err("expected (example (given ...) (gold ...))", node)
        given = dict(_binding(b, by_name) for b in node[1][1:])
        gold = dict(_binding(b, by_name) for b in node[2][1:])
        examples.append(Example(given, gold))
    return examples


def print_data(examples: list[Example], problem: Problem) -> str:
    order = {v: i for i, v in enumerate(problem.variables)}
    lines = []
    for ex in examples:
        given = " ".join(
            f"(= {v.name} {print_value(ex.evidence[v])})"
            for v in sorted(ex.evidence, key=order.get)
        )
        gold = " ".join(
            f"(= {v.name} {print_value(ex.gold[v])})"
            for v in sorted(ex.gold, key=order.get)
        )
        lines.append(f"(example (given {given}) (gold {gold}))")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# Predictions

def print_predictions(preds: list[dict[Variable, Value]], problem: Problem) -> str:
    order = {v: i for i, v in enumerate(problem.variables)}
    lines = []
    for pred in preds:
        body = " ".join(
            f"(= {v.name} {print_value(pred[v])})" for v in sorted(pred, key=order.get)
        )
        lines.append(f"(prediction {body})")
    return "\n".join(lines) + "\n"


def parse_assignments_standalone(text: str, head: str) -> list[dict[str, Value]]:
    """Read (head (= var val) ...) forms without a problem file.

    Sorts are inferred from the value literals, which is unambiguous
    because Booleans print as true/false and rationals as exact numbers.
    """
    out = []
    for node in read_all(text):
        if not (isinstance(node, list) and node and isinstance(node[0], Sym)
                and node[0].text == head):
            raise _err(f"expected ({head} (= var val) ...)", node)
        row: dict[str, Value] = {}
        for b in node[1:]:
            ok = (
                isinstance(b, list) and len(b) == 3
                and isinstance(b[0], Sym) and b[0].text == "="
                and isinstance(b[1], Sym) and isinstance(b[2], Sym)
            )
            if not ok:
                raise _err("expected (= var value)", b)
            if b[2].text in ("true", "false"):
                row[b[1].text] = b[2].text == "true"
            else:
                row[b[1].text] = parse_number(b[2])
        out.append(row)
    return out


def parse_gold_standalone(text: str) -> list[dict[str, Value]]:
    """Gold parts of a dataset file, keyed by variable name."""
    out = []
    for node in read_all(text):
        ok = (
            isinstance(node, list) and len(node) == 3
            and isinstance(node[0], Sym) and node[0].text == "example"
        )
        if not ok:
            raise _err("expected (example (given ...) (gold ...))", node)
        gold_part = node[2]
        if not (isinstance(gold_part, list) and gold_part
                and isinstance(gold_part[0], Sym) and gold_part[0].text == "gold"):
            raise _err("expected (gold ...) as the second part", node)
        row: dict[str, Value] = {}
        for b in gold_part[1:]:
            ok = (
                isinstance(b, list) and len(b) == 3
                and isinstance(b[0], Sym) and b[0].text == "="
                and isinstance(b[1], Sym) and isinstance(b[2], Sym)
            )
            if not ok:
                raise _err("expected (= var value)", b)
            if b[2].text in ("true", "false"):
                row[b[1].text] = b[2].text == "true"
            else:
                row[b[1].text] = parse_number(b[2])
        out.append(row)
    return out


# ----------------------------------------------------------------------
# Model files

def print_model(model: ModelWeights) -> str:
    lines = [f"#C={print_rat(model.C)}", f"#eps={print_rat(model.eps)}"]
    for sid in sorted(model.weights):
        lines.append(f"{sid} {print_rat(model.weights[sid])}")
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> ModelWeights:
    C = eps = None
    weights: dict[str, Fraction] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            if key == "C":
                C = Fraction(val)
            elif key == "eps":
                eps = Fraction(val)
            else:
                raise ParseError(f"unknown model header {key!r}", lineno)
            continue
        parts = line.split()
        if len(parts) != 2 or not _NUMBER_RE.match(parts[1]):
            raise ParseError("expected 'ID WEIGHT' lines", lineno)
        if parts[0] in weights:
            raise DuplicateId(f"weight for {parts[0]!r} given twice", lineno)
        w = Fraction(parts[1])
        if w < 0:
            raise ParseError("weights must be nonnegative", lineno)
        weights[parts[0]] = w
    if C is None or eps is None:
        raise ParseError("model file needs #C= and #eps= headers")
    return ModelWeights(weights=weights, C=C, eps=eps)
