"""Exception hierarchy shared by all kannai modules."""


class KannaiError(Exception):
    """Base class for every error raised by this package."""


class InputError(KannaiError, ValueError):
    """A precondition on user-supplied data was violated."""


class DegenerateGrid(InputError):
    pass


class UnsupportedGrid(InputError):
    pass


class SizeLimit(InputError):
    pass


class NormalizationTooSmall(InputError):
    pass


class DegenerateSelector(InputError):
    pass


class InvalidTime(InputError):
    pass


class InvalidPrecision(InputError):
    pass


class MissingParameter(InputError):
    pass


class InvalidPanel(InputError):
    pass


class ShapeError(InputError):
    pass


class PlanMismatch(InputError):
    pass


class InvalidPerturbation(InputError):
    pass


class InvalidOperator(InputError):
    pass


class NotDissipative(InputError):
    pass


class NotNormal(InputError):
    pass


class UnsupportedDimension(InputError):
    pass


class LogDomainError(InputError):
    pass


class SingularSystem(KannaiError):
    pass


class NoSpectralGap(KannaiError):
    pass


class DegenerateOutput(KannaiError):
    pass


class NumericalBreakdown(KannaiError, ArithmeticError):
    pass


class RootFindingFailure(NumericalBreakdown):
    pass


class QuadratureFailure(NumericalBreakdown):
    pass


class UnstableMarch(NumericalBreakdown):
    pass


class BoundViolation(KannaiError):
    """A measured error exceeded the bound it is supposed to satisfy."""
