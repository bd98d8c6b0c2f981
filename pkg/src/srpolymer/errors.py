"""Exception types shared across the package."""


class SRPolymerError(Exception):
    """Base class for all package errors."""


class ShapeError(SRPolymerError, ValueError):
    """Input arrays or configurations have the wrong length or shape."""


class ParameterError(SRPolymerError, ValueError):
    """A model or run parameter violates a precondition."""


class CapExceededError(SRPolymerError):
    """Exact enumeration was requested above the configured size cap."""


class InvariantError(SRPolymerError, RuntimeError):
    """A cached Monte Carlo quantity drifted away from its recomputed value."""

    def __init__(self, message: str, sweep: int | None = None):
        super().__init__(message)
        self.sweep = sweep
