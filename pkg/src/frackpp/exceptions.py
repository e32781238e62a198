"""Exception hierarchy shared by the solver modules."""

from __future__ import annotations


class FracKPPError(Exception):
    """Base class for all errors raised by :mod:`frackpp`."""


class ParameterError(FracKPPError, ValueError):
    """An argument lies outside the admissible range."""


class MLAccuracyError(FracKPPError, ArithmeticError):
    """The Mittag-Leffler evaluator could not reach its accuracy target."""

    def __init__(self, message: str, achieved: float) -> None:
        super().__init__(message)
        self.achieved = achieved


class SpectralTableError(FracKPPError):
    """A spectral table failed its forward-transform validation."""

    def __init__(self, message: str, max_residual: float) -> None:
        super().__init__(message)
        self.max_residual = max_residual


class KernelValidationError(FracKPPError):
    """A tabulated propagation kernel violated one of the Green's function conditions."""

    def __init__(self, message: str, condition: str, residual: float) -> None:
        super().__init__(message)
        self.condition = condition
        self.residual = residual


class RunawayTreeError(FracKPPError, RuntimeError):
    """A branching tree exceeded the configured depth or population guard."""


class BoundViolationError(FracKPPError, ValueError):
    """The initial condition exceeds the sup-norm bound 1 and no override was given."""


class DomainTooSmallError(FracKPPError):
    """The periodic reference domain leaks more mass than tolerated."""

    def __init__(self, message: str, leak: float) -> None:
        super().__init__(message)
        self.leak = leak


class PicardDivergenceError(FracKPPError, RuntimeError):
    """The Picard iteration did not reach its tolerance."""

    def __init__(self, message: str, history: list[float]) -> None:
        super().__init__(message)
        self.history = history
