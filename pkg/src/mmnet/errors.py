"""Exception hierarchy shared by every mmnet module."""


class MmnetError(Exception):
    """Base class for all library errors."""


class NotNormalized(MmnetError, ValueError):
    pass


class NegativeMass(MmnetError, ValueError):
    pass


class ShapeMismatch(MmnetError, ValueError):
    pass


class UnknownAxis(MmnetError, KeyError):
    pass


class AxisOverlap(MmnetError, ValueError):
    pass


class AxisMismatch(MmnetError, ValueError):
    pass


class InvalidLambda(MmnetError, ValueError):
    pass


class ZeroMassConditioning(MmnetError, ValueError):
    """Raised when a conditional is requested at a zero-probability cell."""

    def __init__(self, message, mask=None):
        super().__init__(message)
        self.mask = mask


class InvalidCut(MmnetError, ValueError):
    pass


class AlphabetMismatch(MmnetError, ValueError):
    pass


class InvalidProbability(MmnetError, ValueError):
    pass


class MultipleDestinations(MmnetError, ValueError):
    pass


class NotProductForm(MmnetError, ValueError):
    pass


class BudgetExhausted(MmnetError, RuntimeError):
    pass


class NonUniformMarginal(MmnetError, ValueError):
    pass


class AlphaOne(MmnetError, ValueError):
    pass


class LambdaOutOfRange(MmnetError, ValueError):
    pass


class InvalidDestination(MmnetError, ValueError):
    pass


class NonMemorylessInput(MmnetError, ValueError):
    pass


class InvalidRates(MmnetError, ValueError):
    pass


class ParseError(MmnetError, ValueError):
    pass


class CheckFailed(MmnetError, RuntimeError):
    """A requested verification did not pass; ``failures`` lists what failed."""

    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)
