"""Exception hierarchy.

``ConfigurationError`` subclasses signal invalid parameters or inputs supplied
by the caller (CLI exit code 2); everything else derived from ``GsmarkError``
is a runtime failure (CLI exit code 3).
"""


class GsmarkError(Exception):
    """Base class for all package errors."""


class ConfigurationError(GsmarkError):
    """Invalid parameters, dimensions, or configuration values."""


class WrongLength(ConfigurationError):
    """A bit sequence does not have the required length."""


class LengthMismatch(ConfigurationError):
    """Two sequences that must be equally long are not."""


class InfeasibleParameters(ConfigurationError):
    """Code or ensemble parameters violate the degree equation."""


class InvalidSpec(ConfigurationError):
    """A channel specification is out of range or out of bounds."""


class ConfigMismatch(ConfigurationError):
    """Pipeline or experiment configuration is internally inconsistent."""


class DomainError(ConfigurationError):
    """A numeric argument lies outside the function's domain."""


class NonFiniteInput(ConfigurationError):
    """An input contains NaN or infinity where finite values are required."""


class ChecksumMismatch(GsmarkError):
    """Payload integrity check failed on unpack."""


class ConstructionFailed(GsmarkError):
    """No acceptable code was found within the retry budget."""


class BracketFailure(GsmarkError):
    """Bisection could not establish a sign change over the search bracket."""


class FormatError(GsmarkError):
    """A serialized artifact (latent file, alist, CSV) is malformed."""
