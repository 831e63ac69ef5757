"""
Exception hierarchy shared by every semeq module.
"""


class SemeqError(Exception):
    """Base class for all semeq errors."""


class InvalidArgumentError(SemeqError, ValueError):
    """Raised on dimension mismatches, bad counts and out-of-range parameters."""


class DegenerateAnchorsError(SemeqError, ValueError):
    """Raised when an anchor set cannot define a relative space (zero norms, low rank)."""


class InvalidConfigurationError(SemeqError, ValueError):
    """Raised when an equalizer or run configuration is inconsistent."""


class NumericError(SemeqError, ArithmeticError):
    """Raised when a gradient or intermediate value is not finite."""


class MatrixFormatError(SemeqError, ValueError):
    """Raised when a SEQM matrix file is malformed."""
