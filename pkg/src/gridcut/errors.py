"""Exception types shared across the package."""


class GridcutError(Exception):
    """Base class for all package errors."""


class InvalidInstanceError(GridcutError):
    """An instance failed validation; .violations holds the details."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"invalid instance: {lines}")


class DimensionMismatchError(GridcutError):
    pass


class NonConvexUnitError(GridcutError):
    pass


class ToleranceTooTightError(GridcutError):
    pass


class MixedStatusError(GridcutError):
    pass


class NoViolationError(GridcutError):
    pass


class TooLargeError(GridcutError):
    pass


class EmptyPoolError(GridcutError):
    pass


class EmptyInstanceError(GridcutError):
    pass


class NegativeRangeError(GridcutError):
    pass


class UnsatisfiableCutError(GridcutError):
    """A feasibility cut admits no schedule at all: the master is infeasible."""

    def __init__(self, cut_iter, cut_t, message=""):
        self.cut_iter = cut_iter
        self.cut_t = cut_t
        super().__init__(
            message or f"feasibility cut (iter={cut_iter}, t={cut_t}) cannot be satisfied"
        )


class LengthMismatchError(GridcutError):
    pass


class InvalidSpecError(GridcutError):
    pass
