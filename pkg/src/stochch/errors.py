class StochchError(Exception):
    """Base class of the package's errors."""


class ConfigurationError(StochchError, ValueError):
    """Invalid or inconsistent parameters."""


class BlowUpError(StochchError, RuntimeError):
    """A simulated state became non-finite."""

    def __init__(self, message, step=None, mode=None, path=None):
        super().__init__(message)
        self.step = step
        self.mode = mode
        self.path = path


class ExclusionBudgetError(StochchError, RuntimeError):
    """Too many Monte Carlo paths had to be excluded as non-finite."""


class DegenerateFitError(StochchError, ValueError):
    """A log-log fit was requested on zero or negative data."""
