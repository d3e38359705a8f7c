"""Exception types raised by the numerical core and the harness."""


class DQCError(Exception):
    """Base class for every error raised by this package."""


class OperatorSizeError(DQCError, ValueError):
    pass


class NumericError(DQCError, ArithmeticError):
    pass


class DegenerateStateError(DQCError, ArithmeticError):
    pass


class DimensionMismatchError(DQCError, ValueError):
    pass


class BasisError(DQCError, ValueError):
    pass


class ModelParameterError(DQCError, ValueError):
    pass


class MemoryBudgetError(DQCError, MemoryError):
    pass


class EigensolverError(DQCError, RuntimeError):

    def __init__(self, label: str, reason: str):
        self.label = label
        self.reason = reason
        super().__init__(f"Eigensolver failed for '{label}': {reason}")


class NumericalInstabilityError(DQCError, RuntimeError):
    pass


class DarkStateError(DQCError, RuntimeError):
    pass


class DirectionDegenerateError(DQCError, RuntimeError):
    pass


class EstimateAbortedError(DQCError, RuntimeError):
    pass


class DegenerateSpectrumError(DQCError, ValueError):
    pass


class EmptySectionError(DQCError, ValueError):
    pass


class ConfigError(DQCError, ValueError):
    """Config validation failure carrying every error found, not just the first."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("Invalid experiment config:\n" + "\n".join(f"  - {e}" for e in self.errors))
