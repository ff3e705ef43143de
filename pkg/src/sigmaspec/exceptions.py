"""Exception hierarchy shared by all modules."""


class SigmaSpecError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SigmaSpecError, ValueError):
    """A parameter or input violates a documented precondition."""


class DomainError(ValidationError):
    """A function was evaluated at a singular point or outside its domain."""


class OutOfRangeError(DomainError):
    """Evaluation requested outside the sampled range of a table."""


class GridMismatchError(ValidationError):
    """Two grid functions live on different grids."""


class ConvergenceError(SigmaSpecError, RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class IndexMismatchError(ConvergenceError):
    """A converged profile does not have the requested excitation index."""


class AccuracyError(SigmaSpecError, RuntimeError):
    """A request lies outside the range where accuracy has been validated."""


class DegeneracyError(SigmaSpecError, RuntimeError):
    """Gram-Schmidt filtering collapsed a level to (numerically) zero."""


class InstabilityError(SigmaSpecError, RuntimeError):
    """The time integrator detected unphysical norm growth."""

    def __init__(self, message, tau=None, growth=None):
        super().__init__(message)
        self.tau = tau
        self.growth = growth
