"""Exception hierarchy shared by every module of the package."""


class OneresError(Exception):
    """Base class for all errors raised by :mod:`oneres`."""


class PreconditionError(OneresError, ValueError):
    """An argument is outside the documented domain of an operation."""


class RootOfUnity(OneresError):
    pass


class ExtraResonance(OneresError):
    pass


class TailTooLow(OneresError):
    pass


class NonzeroConstant(OneresError):
    pass


class SingularLinearPart(OneresError):
    pass


class ZeroDivisor(OneresError):
    """A divisor |lambda^alpha - lambda_i| vanished (to double precision) inside an eliminated set."""

    def __init__(self, message, index=None, component=None):
        super().__init__(message)
        self.index = index
        self.component = component


class ConditionViolated(OneresError):
    """A hypothesis of the elimination theorem fails; ``condition`` is 1 or 2."""

    def __init__(self, message, condition, witness=None, stage=None):
        super().__init__(message)
        self.condition = condition
        self.witness = witness
        self.stage = stage


class NotInBasin(OneresError):
    pass


class NoConvergence(OneresError):
    pass


class SearchExhausted(OneresError):
    pass


class EmptyAnnulus(OneresError):
    pass


class NotADivisor(PreconditionError):
    """p does not divide k."""


class NeverEntersBasin(OneresError):
    pass


class ConfigInvalid(OneresError):
    pass


class SuiteFailed(OneresError):
    pass
