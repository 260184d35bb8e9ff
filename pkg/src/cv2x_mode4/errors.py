"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when a scenario or input file violates a configuration invariant."""


class ModelError(RuntimeError):
    """Raised when an analytic computation cannot converge (e.g. threshold search)."""


class NotReadyError(RuntimeError):
    """Raised when a measurement is requested before enough history exists."""
