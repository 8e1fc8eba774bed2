"""Exception hierarchy shared by every posic module."""


class PosicError(Exception):
    """Base class for all errors raised by posic."""


class ZeroPolynomial(PosicError):
    pass


class DegreeZero(PosicError):
    pass


class SingularA(PosicError):
    pass


class ZeroDcGain(PosicError):
    pass


class NonFiniteJacobian(PosicError):
    pass


class NonMonotone(PosicError):
    pass


class NewtonDiverged(PosicError):
    pass


class AssumptionViolated(PosicError):
    pass


class DimensionMismatch(PosicError):
    pass


class EquilibriumOutOfRange(PosicError):
    pass


class OutOfImage(PosicError):
    pass


class EigenFailure(PosicError):
    pass


class InadmissibleDisturbance(PosicError):
    pass


class StepSizeUnderflow(PosicError):
    pass


class NonFiniteState(PosicError):
    pass


class ScenarioError(PosicError):
    """Malformed or inconsistent scenario document."""
