"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ParmError(Exception):
    """Base class for every error raised by this package."""


# economy validation ---------------------------------------------------------


class InvalidEconomy(ParmError):
    """Raised by validation; carries every violated invariant at once."""

    def __init__(self, violations: list[ParmError]):
        self.violations = list(violations)
        msg = "; ".join(f"{type(v).__name__}: {v}" for v in self.violations)
        super().__init__(msg)

    def kinds(self) -> set[type]:
        return {type(v) for v in self.violations}


class NonStochasticAlpha(ParmError):
    pass


class NegativeMass(ParmError):
    pass


class IdioExceedsOutsideOption(ParmError):
    pass


class DeltaOutOfRange(ParmError):
    pass


class DimensionMismatch(ParmError):
    pass


class PriceOutOfRange(ParmError):
    pass


class ConfigError(ParmError):
    """A configuration file could not be parsed; ``key`` names the culprit."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


# solver layer ----------------------------------------------------------------


class Infeasible(ParmError):
    pass


class Unbounded(ParmError):
    pass


class IterationLimit(ParmError):
    def __init__(self, message: str, best=None):
        super().__init__(message)
        self.best = best


# mechanisms / audit ----------------------------------------------------------


class FlowExceedsDemand(ParmError):
    pass


class SingularSystem(ParmError):
    def __init__(self, reported_type: int, condition: float):
        self.reported_type = reported_type
        self.condition = condition
        super().__init__(
            f"penalty system for reported type {reported_type} is singular "
            f"(condition estimate {condition:.3g})"
        )


class PenaltyUndefined(ParmError):
    def __init__(self, reported_type: int):
        self.reported_type = reported_type
        super().__init__(f"no drivers of reported type {reported_type} are employed")


class EmptyType(ParmError):
    pass


class NoDispatchPlan(ParmError):
    pass


class NonConvergence(ParmError):
    pass


class UnsupportedClass(ParmError):
    pass
