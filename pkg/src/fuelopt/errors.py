"""Exception hierarchy shared by all modules."""


class FuelOptError(Exception):
    """Base class for errors raised by fuelopt."""


class InvalidArgumentError(FuelOptError, ValueError):
    """Raised for malformed or out-of-range inputs."""


class NumericFailure(FuelOptError, RuntimeError):
    """Raised when an iterative method does not reach its tolerance.

    ``best_gap`` carries the best certified duality gap (or residual) seen.
    """

    def __init__(self, message, best_gap=float("nan")):
        super().__init__(message)
        self.best_gap = best_gap


class UnreachableError(FuelOptError):
    """Raised when no probed horizon reaches the origin."""
