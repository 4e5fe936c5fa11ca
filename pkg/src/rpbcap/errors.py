"""Exception and warning types shared by all modules."""


class RpbcapError(Exception):
    """Base class for package errors."""


class ConfigError(RpbcapError):
    """Scenario / parameter file violates the schema. CLI exit code 2."""


class MissingCoefficientsError(RpbcapError):
    """A required correlation coefficient set is absent from the data file."""


class NonConvergenceError(RpbcapError):
    """Iterative solve failed; carries the best iterate and diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TearNonConvergenceError(NonConvergenceError):
    """Flowsheet recycle tear failed to close; diagnostics hold the trace."""


class TemperatureCrossError(RpbcapError):
    """Heat exchanger temperature cross; message carries the stream dump."""


class UnreachableTargetError(RpbcapError):
    """Sizing target not attainable within the geometry cap."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class InfeasibleOptimizationError(RpbcapError):
    """No feasible point found. CLI exit code 4."""


class AllStartsFailedError(InfeasibleOptimizationError):
    """Every multistart local solve failed; carries per-start diagnostics."""

    def __init__(self, message, per_start=None):
        super().__init__(message)
        self.per_start = per_start or []


class CorrelationRangeWarning(UserWarning):
    """Correlation evaluated outside its validity range (input clamped)."""


class FloodingExceededWarning(UserWarning):
    """A converged column profile contains nodes above 100% flooding."""


class HoldupClampWarning(UserWarning):
    """Liquid holdup correlation exceeded 0.95 * void fraction and was clamped."""
