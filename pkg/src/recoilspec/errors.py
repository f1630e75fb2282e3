class RecoilSpecError(Exception):
    """Base class for all package errors."""


class DomainError(RecoilSpecError, ValueError):
    """An argument lies outside the domain where the relation is defined."""


class ConfigError(RecoilSpecError, ValueError):
    """Invalid configuration; the message names the offending field."""


class NumericalError(RecoilSpecError, ArithmeticError):
    """A numerical procedure failed or produced an inconsistent result."""


class IdentifiabilityError(NumericalError):
    """The data cannot separate the requested parameters."""


class TruncationWarning(UserWarning):
    """A Fourier series was cut off before its coefficients decayed."""


class PhysicsWarning(UserWarning):
    """Inputs are valid but outside the regime the model is trusted in."""
