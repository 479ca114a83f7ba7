"""Exception hierarchy.

Validation problems derive from ``ValueError`` (CLI exit code 2); numeric
failures derive from ``ArithmeticError`` (CLI exit code 3).
"""


class ValidationError(ValueError):
    pass


class DegenerateInputError(ValidationError):
    """Input sits on a removable singularity or a degenerate case."""


class ZeroDriftError(ValidationError):
    pass


class NotPisotError(ValidationError):
    pass


class NumericRangeError(ArithmeticError):
    """A coordinate overflowed to a non-finite value."""


class PrecisionError(ArithmeticError):
    pass


class BudgetExceededError(ArithmeticError):
    def __init__(self, message, reached_k=None, partial=None):
        super().__init__(message)
        self.reached_k = reached_k
        self.partial = partial


class NonConvergenceError(ArithmeticError):
    pass
