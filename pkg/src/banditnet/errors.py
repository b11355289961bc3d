"""Exception types shared across the package."""


class BanditNetError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BanditNetError):
    """A parameter combination is infeasible or outside its valid range."""


class GenerationError(BanditNetError):
    """Randomized construction failed within its retry budget."""


class ValidationError(BanditNetError):
    """An input object violates a structural precondition."""


class UsageError(BanditNetError):
    """An API was called in the wrong state or with mismatched inputs."""
