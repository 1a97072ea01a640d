"""Command-line front end.

Commands: solve, train, predict, eval, gen. Every command's output is a
pure function of its inputs and --seed (LMT_SEED supplies a default).
Exit codes: 0 success (including sat/optimum), 1 infeasible/unsat,
2 parse or format error, 3 usage error, 4 timeout with incumbent.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import files
from .errors import Infeasible, LmtError, MixedCostKind, ParseError, TrainingDataInfeasible
from .formulas import Sort
from .learning import ModelWeights, infer, train
from .solver import Problem, Solution, solve_maxsmt, solve_omt
from .costs import CostKind
from .tasks import (
    ActivityConfig,
    HousingConfig,
    evaluate_predictions,
    gen_activity_dataset,
    gen_housing_dataset,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_FORMAT = 2
EXIT_USAGE = 3
EXIT_TIMEOUT = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        print(f"error: cannot read {path}: {e}", file=sys.stderr)
        raise SystemExit(EXIT_FORMAT)


def _parse_problem(path: str) -> Problem:
    return files.parse_problem(_read(path))


def _default_seed() -> int:
    env = os.environ.get("LMT_SEED")
    return int(env) if env else 0


def _rat(text: str) -> Fraction:
    return Fraction(text)


def build_parser() -> _Parser:
    p = _Parser(prog="lmt", description="Weighted MAX-SMT / OMT with max-margin weight learning")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one problem file")
    ps.add_argument("problem")
    ps.add_argument("--mode", choices=("auto", "maxsmt", "omt"), default="auto")
    ps.add_argument("--timeout", type=float, default=None, metavar="SECS")

    pt = sub.add_parser("train", help="learn soft-constraint weights")
    pt.add_argument("--problem", required=True)
    pt.add_argument("--data", required=True)
    pt.add_argument("--C", required=True, type=_rat)
    pt.add_argument("--eps", required=True, type=_rat)
    pt.add_argument("--out", required=True)
    pt.add_argument("--seed", type=int, default=None)
    pt.add_argument("--tau", type=_rat, default=Fraction(0))

    pp = sub.add_parser("predict", help="predict outputs for a dataset")
    pp.add_argument("--problem", required=True)
    pp.add_argument("--model", required=True)
    pp.add_argument("--data", required=True)
    pp.add_argument("--out", required=True)

    pe = sub.add_parser("eval", help="score predictions against gold outputs")
    pe.add_argument("--pred", required=True)
    pe.add_argument("--gold", required=True)
    pe.add_argument("--tau", type=_rat, default=Fraction(0))

    pg = sub.add_parser("gen", help="generate a synthetic dataset")
    pg.add_argument("--task", choices=("housing", "activity"), required=True)
    pg.add_argument("--seed", type=int, default=None)
    pg.add_argument("--n", type=int, required=True, metavar="COUNT")
    pg.add_argument("--out-dir", required=True)
    return p


def _print_solution(solution: Solution, problem: Problem) -> int:
    if solution.status == "infeasible":
        if solution.stats.timed_out:
            print("status timeout")
            return EXIT_TIMEOUT
        print("status infeasible")
        return EXIT_INFEASIBLE
    print("status timeout" if solution.stats.timed_out else "status optimum")
    print(f"objective {files.print_rat(solution.objective)}")
    for v in problem.variables:
        print(f"(= {v.name} {files.print_value(solution.assignment[v])})")
    return EXIT_TIMEOUT if solution.stats.timed_out else EXIT_OK


def cmd_solve(args) -> int:
    problem = _parse_problem(args.problem)
    all_bool = all(s.kind == CostKind.BOOLEAN for s in problem.soft)
    mode = args.mode
    if mode == "auto":
        mode = "maxsmt" if all_bool else "omt"
    if mode == "maxsmt" and not all_bool:
        print("error: --mode maxsmt needs Boolean-cost softs only (use omt)", file=sys.stderr)
        return EXIT_USAGE
    solve = solve_maxsmt if mode == "maxsmt" else solve_omt
    return _print_solution(solve(problem, timeout=args.timeout), problem)


def cmd_train(args) -> int:
    problem = _parse_problem(args.problem)
    examples = files.parse_data(_read(args.data), problem)
    try:
        model = train(problem, examples, C=args.C, eps=args.eps, tau=args.tau)
    except TrainingDataInfeasible as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    Path(args.out).write_text(files.print_model(model))
    Path(args.out + ".log").write_text(model.log.to_text())
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    problem = _parse_problem(args.problem)
    model = files.parse_model(_read(args.model))
    missing = [s.id for s in problem.soft if s.id not in model.weights]
    if missing:
        print(f"error: model has no weight for soft constraints {missing}", file=sys.stderr)
        return EXIT_FORMAT
    extra = sorted(set(model.weights) - {s.id for s in problem.soft})
    if extra:
        print(f"error: model weights for unknown soft constraints {extra}", file=sys.stderr)
        return EXIT_FORMAT
    examples = files.parse_data(_read(args.data), problem)
    preds = []
    try:
        for ex in examples:
            preds.append(infer(model, problem, ex.evidence))
    except Infeasible as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    Path(args.out).write_text(files.print_predictions(preds, problem))
    print(f"{len(preds)} predictions written to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    preds = files.parse_assignments_standalone(_read(args.pred), "prediction")
    golds = files.parse_gold_standalone(_read(args.gold))
    if len(preds) != len(golds):
        print(
            f"error: {len(preds)} predictions vs {len(golds)} gold examples",
            file=sys.stderr,
        )
        return EXIT_FORMAT
    if not preds:
        print("error: nothing to evaluate", file=sys.stderr)
        return EXIT_FORMAT
    # Rebuild variables from the value literals; names identify them.
    from .formulas import Variable

    def to_vars(row):
        return {
            Variable(name, Sort.BOOL if isinstance(val, bool) else Sort.RATIONAL): val
            for name, val in row.items()
        }

    metrics = evaluate_predictions(
        [to_vars(r) for r in preds], [to_vars(r) for r in golds], tau=args.tau
    )
    for line in metrics.lines():
        print(line)
    return EXIT_OK


def cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    if args.n < 2:
        print("error: --n must be at least 2", file=sys.stderr)
        return EXIT_USAGE
    if args.task == "housing":
        config = HousingConfig(n_examples=args.n)
        problem, examples = gen_housing_dataset(config, seed)
    else:
        config = ActivityConfig(n_examples=args.n, min_gap=Fraction(1))
        problem, examples = gen_activity_dataset(config, seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "problem.lmt").write_text(files.print_problem(problem))
    (out / "examples.data").write_text(files.print_data(examples, problem))
    n_train = (args.n * 3) // 5
    (out / "train.data").write_text(files.print_data(examples[:n_train], problem))
    (out / "test.data").write_text(files.print_data(examples[n_train:], problem))
    truth = ModelWeights(
        weights={s.id: s.weight for s in problem.soft},
        C=Fraction(0), eps=Fraction(0),
    )
    (out / "truth.model").write_text(files.print_model(truth))
    print(f"wrote problem.lmt, examples.data, train.data, test.data, truth.model to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": cmd_solve,
        "train": cmd_train,
        "predict": cmd_predict,
        "eval": cmd_eval,
        "gen": cmd_gen,
    }
    try:
        return handlers[args.command](args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except MixedCostKind as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except LmtError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    raise SystemExit(main())
