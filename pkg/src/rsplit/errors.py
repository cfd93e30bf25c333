"""Exception types shared across the package."""


class RsplitError(Exception):
    """Base class for all package errors."""


class ConfigError(RsplitError, ValueError):
    """Invalid configuration or argument domain."""


class NumericError(RsplitError, ArithmeticError):
    """A numerical routine failed to converge or produced non-finite output."""


class SingularChannelError(NumericError):
    """The Gram matrix H H^H is singular or too ill-conditioned to invert."""


class ResourceCapError(RsplitError):
    """An exhaustive enumeration would exceed the configured size cap."""


class NotSaturatedError(RsplitError):
    """The sum rate never reached its saturation level within the search bound."""
