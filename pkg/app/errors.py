"""
Error types for Mercer Lab.

Every operation validates its inputs at the boundary and raises one of the
classes below. The command-line front end maps them onto exit codes.
"""


class MercerLabError(Exception):
    """Base class for all errors raised by the library."""


class InvalidArgumentError(MercerLabError, ValueError):
    """An argument violates an operation's precondition."""


class NotPositiveError(InvalidArgumentError):
    """An operator expected to be positive has a clearly negative eigenvalue."""


class NumericalFailureError(MercerLabError, ArithmeticError):
    """A computation produced non-finite values or failed to converge."""


class DegenerateEigenvalueError(NumericalFailureError):
    """An eigenfunction was requested for a (numerically) zero eigenvalue."""
