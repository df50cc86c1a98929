"""Exception hierarchy shared by all modules.

CLI exit codes: 1 validation error, 2 numeric non-convergence, 3 budget
exceeded.
"""


class LabError(Exception):
    exit_code = 1


class ValidationError(LabError):
    exit_code = 1


class NotStochastic(ValidationError):
    pass


class NonPositiveEntry(ValidationError):
    pass


class DuplicateStep(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class PathTooShort(ValidationError):
    pass


class ZeroMassState(ValidationError):
    pass


class ZeroNotInRange(ValidationError):
    pass


class NonGradient(ValidationError):
    pass


class Unreachable(ValidationError):
    pass


class NotIrreducible(ValidationError):
    pass


class NumericError(LabError):
    exit_code = 2


class NoConvergence(NumericError):
    pass


class TiltNotFound(NumericError):
    pass


class DegenerateWeights(NumericError):
    pass


class BudgetError(LabError):
    exit_code = 3


class StateBudgetExceeded(BudgetError):
    pass


class SearchBudgetExceeded(BudgetError):
    pass


class EnumerationBudgetExceeded(BudgetError):
    pass
