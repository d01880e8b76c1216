"""Exception types shared across the toolkit."""


class CsilocError(Exception):
    """Base class for all csiloc errors."""


class ConfigurationError(CsilocError, ValueError):
    """A scenario, model, or run configuration is invalid."""


class DomainError(CsilocError, ValueError):
    """An argument is outside an operation's mathematical domain."""


class ConditioningError(CsilocError, RuntimeError):
    """A linear-algebra step failed due to ill conditioning."""


class TrainingError(CsilocError, RuntimeError):
    """Model training diverged or could not produce a usable model."""
