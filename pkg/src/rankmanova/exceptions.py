"""Exception hierarchy shared across the package."""


class RankManovaError(Exception):
    """Base class for all errors raised by rankmanova."""


class InputError(RankManovaError, ValueError):
    """Malformed or inconsistent input data."""


class ConfigError(RankManovaError, ValueError):
    """Invalid analysis or simulation configuration."""


class NumericalError(RankManovaError, ArithmeticError):
    """A numerical routine could not produce a valid result."""


class MismatchedDimension(InputError):
    pass


class EmptyGroup(InputError):
    pass


class NonFiniteValue(InputError):
    pass


class EmptySample(InputError):
    pass


class OutOfRange(InputError, IndexError):
    pass


class DimensionMismatch(ConfigError):
    pass


class LayoutMismatch(ConfigError):
    pass


class InvalidAlpha(ConfigError):
    pass


class SameComponent(ConfigError):
    pass


class DegenerateGroup(InputError):
    pass


class FamilyTooLarge(ConfigError):
    pass


class InvalidCorrelation(ConfigError):
    pass


class NotPSD(NumericalError):
    pass


class MissingColumn(InputError):
    pass


class NoCompleteRows(InputError):
    pass


class SingleGroup(InputError):
    pass
