"""Exception hierarchy shared by the library and the command line."""


class MimcaError(Exception):
    """Base class for all errors raised by this package."""


class DataError(MimcaError, ValueError):
    """Malformed or unusable input data."""


class NumericalError(MimcaError, ArithmeticError):
    """A numerical procedure failed (divergence, degeneracy)."""


class SeparationError(NumericalError):
    """Logistic regression coefficients diverge (quasi-complete separation)."""
