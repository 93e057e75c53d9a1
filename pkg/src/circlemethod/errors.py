"""Exception types shared across the package.

Each class maps onto one CLI exit code (see ``circlemethod.cli``).
"""


class CircleMethodError(Exception):
    exit_code = 1


class InputError(CircleMethodError, ValueError):
    """Malformed or inconsistent input (dimension mismatch, bad degree, ...)."""

    exit_code = 2


class BudgetExceeded(CircleMethodError):
    """A brute-force scan would exceed the configured point budget."""

    exit_code = 3

    def __init__(self, message, estimate=None, budget=None):
        super().__init__(message)
        self.estimate = estimate
        self.budget = budget


class NonConvergence(CircleMethodError):
    exit_code = 4
