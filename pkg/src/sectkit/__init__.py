"""Euler characteristic curves, the smooth Euler characteristic transform and
two-sample hypothesis tests on collections of shapes."""

from .errors import (ContainmentError, GridMismatchError, NumericalRankError, ParseError,
                     ResourceError, SectkitError, ValidationError)

__version__ = "0.1.0"
