"""Exception hierarchy shared by every detkit module."""


class DetkitError(ValueError):
    """Base class for all errors raised on bad inputs."""


class ParseError(DetkitError):
    """A file could not be decoded."""


class ValidationError(DetkitError):
    """Decoded data violates a data-model invariant."""


class SizeError(DetkitError):
    """Array shapes or lengths are incompatible."""


class ParameterError(DetkitError):
    """A scalar argument is outside its admissible range."""


class NumericError(DetkitError, ArithmeticError):
    """A computation is undefined for the given values (e.g. zero-norm vector)."""
