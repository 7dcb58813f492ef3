"""Exception hierarchy shared by all subpackages."""


class AberrasimError(Exception):
    """Base class for library errors."""


class ValidationError(AberrasimError, ValueError):
    """Malformed input: prescription files, shapes, ranges."""


class PrescriptionError(ValidationError):
    pass


class NumericalError(AberrasimError, ArithmeticError):
    """An iterative method failed or a computation degenerated."""


class ConvergenceError(NumericalError):
    pass


class SurfaceDomainError(NumericalError):
    """Radial coordinate lies beyond the hemispheric limit of a surface."""
