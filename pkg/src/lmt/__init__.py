"""Weighted MAX-SMT / OMT over mixed Boolean-rational worlds, with
discriminative max-margin weight learning."""

from .costs import CostKind, SoftConstraint, boolean_cost, feature_map, linear_cost, total_cost
from .formulas import (
    And,
    Assignment,
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
    bool_var,
    evaluate,
    free_vars,
    lvar,
    rat_var,
    restrict,
    to_nnf,
)
from .learning import Example, ModelWeights, hamming_loss, infer, separation_oracle, train
from .lra import DeltaRational, LinCon, LinSystem, feasible, minimize
from .solver import Branch, Problem, Solution, check_sat, compile_objective, solve_maxsmt, solve_omt

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
