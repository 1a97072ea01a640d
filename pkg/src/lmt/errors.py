"""Exception types shared across the engine."""


class LmtError(Exception):
    """Base class for all engine errors."""


class UnboundVariable(LmtError):
    """An assignment is missing a variable that a formula needs."""


class SortError(LmtError):
    """A value or sub-expression has the wrong sort (Bool vs Rational)."""


class DimensionError(LmtError):
    """Weight vector length does not match the soft-constraint list."""


class FormulaNotLinearCostable(LmtError):
    """Linear cost requested for a formula outside the linear fragment."""


class MixedCostKind(LmtError):
    """A MAX-SMT entry point was handed linear-cost soft constraints."""


class Infeasible(LmtError):
    """Hard constraints plus evidence admit no possible world."""


class TrainingDataInfeasible(LmtError):
    """A training example's evidence contradicts the hard constraints."""

    def __init__(self, example_index: int, message: str = ""):
        self.example_index = example_index
        super().__init__(message or f"hard constraints infeasible on example {example_index}")


class GenerationError(LmtError):
    """A dataset generator could not produce a valid instance."""


class ParseError(LmtError):
    """Problem/data/model text does not conform to the grammar."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{line}:{col}: {message}" if col is not None else f"{line}: {message}"
        super().__init__(message)


class MissingBounds(ParseError):
    """A rational variable was declared without finite box bounds."""


class DuplicateId(ParseError):
    """Two declarations or soft constraints share an identifier."""
