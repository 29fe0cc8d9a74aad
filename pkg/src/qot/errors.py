"""Exception types shared across the package."""


class QotError(Exception):
    """Base class for all qot errors."""


class ValidationError(QotError, ValueError):
    """An input violates a structural invariant (shape, symmetry, trace, ...)."""


class PositivityError(QotError, ValueError):
    """A matrix that must be positive-definite is not (or a flow lost positivity)."""

    def __init__(self, msg, step=None, min_eig=None):
        super().__init__(msg)
        self.step = step
        self.min_eig = min_eig


class SingularSystemError(QotError, ValueError):
    """A linear solve hit a (numerically) singular operator; usually an invalid basis."""


class ConvergenceError(QotError, RuntimeError):
    """An iterative solver exhausted its iteration budget without converging."""
