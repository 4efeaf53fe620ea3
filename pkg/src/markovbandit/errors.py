"""Exception hierarchy shared by every module of the package."""


class BanditError(Exception):
    """Base class for all errors raised by markovbandit."""


# exponential family
class NonStochastic(BanditError, ValueError):
    pass


class Reducible(BanditError, ValueError):
    pass


class ConstantReward(BanditError, ValueError):
    pass


class ZeroMass(BanditError, ValueError):
    pass


class OutOfRange(BanditError, ValueError):
    pass


class OutOfMeanSpace(BanditError, ValueError):
    pass


class EigenFailure(BanditError, ArithmeticError):
    pass


class InfiniteDivergence(BanditError, ArithmeticError):
    pass


# concentration
class EmptySet(BanditError, ValueError):
    pass


class NotDoeblin(BanditError, ValueError):
    pass


# environment
class BadPlayCount(BanditError, ValueError):
    pass


class WrongSetSize(BanditError, ValueError):
    pass


class DuplicateArm(BanditError, ValueError):
    pass


class NeverPlayed(BanditError, ValueError):
    pass


# policies
class InsufficientArms(BanditError, RuntimeError):
    """|W_t| < M; cannot happen for a consistent policy state."""


# regret
class MismatchedHorizon(BanditError, ValueError):
    pass


class CountMismatch(BanditError, ValueError):
    pass


# harness
class ConfigError(BanditError, ValueError):
    """Invalid experiment configuration; the message names the field."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
