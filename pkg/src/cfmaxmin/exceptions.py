"""Exception types raised by the simulator and optimizer."""


class CellFreeError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(CellFreeError, ValueError):
    pass


class NotPositiveDefinite(CellFreeError, ValueError):
    """A Cholesky pivot fell below the relative tolerance.

    ``index`` optionally identifies the offending item (e.g. a UE) when the
    failure happens inside a batched computation.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class ZeroVector(CellFreeError, ValueError):
    pass


class InvalidConfig(CellFreeError, ValueError):
    pass


class InvalidParameter(CellFreeError, ValueError):
    pass


class NonPositiveDistance(CellFreeError, ValueError):
    pass


class InsufficientRealizations(CellFreeError, ValueError):
    pass


class DegenerateDenominator(CellFreeError, ArithmeticError):
    pass


class InvalidFraction(CellFreeError, ValueError):
    pass


class ZeroSignalDirection(CellFreeError, ArithmeticError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NonConvergence(CellFreeError, RuntimeError):
    pass


class IterationError(CellFreeError):
    """Wraps a subproblem failure with the alternating-loop iteration index."""

    def __init__(self, iteration, cause):
        super().__init__(f"iteration {iteration}: {cause}")
        self.iteration = iteration
        self.cause = cause

    def __reduce__(self):
        return type(self), (self.iteration, self.cause)


class DropError(CellFreeError):
    """Wraps a failure inside one simulated drop."""

    def __init__(self, drop_index, cause):
        super().__init__(f"drop {drop_index}: {cause}")
        self.drop_index = drop_index
        self.cause = cause

    def __reduce__(self):
        return type(self), (self.drop_index, self.cause)
