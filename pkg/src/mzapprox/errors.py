"""Exception hierarchy shared across the package."""


class MZError(Exception):
    """Base class for all package errors."""


class DomainError(MZError, ValueError):
    """An argument lies outside the operation's domain."""


class ResourceError(MZError):
    """A construction would exceed a configured size cap."""


class ConstructionError(MZError):
    """A point set could not be built with the requested guarantees."""


class LayerError(MZError):
    """A sampling layer cannot support the requested degree."""


class ConvergenceError(MZError):
    """An iterative solver ran out of budget.

    The last objective value reached is kept on ``objective``.
    """

    def __init__(self, message, objective=None, iterations=None):
        super().__init__(message)
        self.objective = objective
        self.iterations = iterations
