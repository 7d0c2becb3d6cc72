"""Exception hierarchy shared by all sectkit modules."""


class SectkitError(Exception):
    """Base class for every error raised by sectkit."""


class ParseError(SectkitError):
    """A file could not be parsed."""


class ValidationError(SectkitError):
    """Input parsed but violates a structural invariant."""


class ContainmentError(ValidationError):
    """A shape does not lie inside the declared bounding ball."""


class GridMismatchError(ValidationError):
    """Two fields or curves were sampled on incompatible grids."""


class ResourceError(SectkitError):
    """A computation would exceed a configured resource bound."""


class NumericalRankError(SectkitError):
    """An eigenvalue needed as a divisor is numerically zero."""
