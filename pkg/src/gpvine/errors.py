"""Exception hierarchy shared by all gpvine modules."""


class GPVineError(Exception):
    """Base class for every error raised by gpvine."""


class DomainError(GPVineError, ValueError):
    """A parameter lies outside the admissible domain of an operation."""


class BoundaryError(DomainError):
    """A pseudo-observation sits on the boundary of the unit interval."""


class SizeError(GPVineError, ValueError):
    """Inputs have the wrong number of rows or mismatched shapes."""


class FitError(GPVineError, RuntimeError):
    """An estimator could not produce a fit from the given data."""


class NumericalError(GPVineError, ArithmeticError):
    """A factorization or quadrature failed irrecoverably."""


class WindowError(FitError):
    """A local-likelihood kernel window holds too few observations."""


class BandwidthError(FitError):
    """No bandwidth on the search grid yields a usable leave-one-out score."""


class StateError(GPVineError, RuntimeError):
    """An object was used before it was fitted."""


class UnsupportedOperation(GPVineError, TypeError):
    """The operation is not defined for this kind of object."""


class ParseError(GPVineError, ValueError):
    """A data or model file could not be parsed."""
