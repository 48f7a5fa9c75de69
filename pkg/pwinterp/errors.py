"""
Exception hierarchy for the toolkit.

Every exception carries the exit code the command line maps it to, the same
way request handlers carry an HTTP status code.
"""
from typing import Optional


class PWInterpError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 1

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class ConfigError(PWInterpError):
    """Unreadable or inconsistent run configuration."""

    exit_code = 3


class ConfigValidationError(ConfigError):
    """A configuration parameter lies outside its documented range."""

    exit_code = 4


class SequenceError(PWInterpError):
    """Invalid node sequence, half-plane membership or strip bound."""

    exit_code = 6


class DegenerateSequenceError(SequenceError):
    """Too few points for a pairwise quantity to be defined."""


class NumericalError(PWInterpError):
    """A numerical procedure failed to reach its tolerance."""

    exit_code = 5


class QuadratureNotConvergedError(NumericalError):
    """Panel doubling hit its cap before successive values agreed."""

    def __init__(self, detail: str, last_value, previous_value):
        super().__init__(detail)
        self.last_value = last_value
        self.previous_value = previous_value


class TruncationInsufficientError(NumericalError):
    """A truncated line integral still has a large tail at the maximal radius."""

    def __init__(self, detail: str, tail: float, radius: float):
        super().__init__(detail)
        self.tail = tail
        self.radius = radius


class GeneratingRangeError(NumericalError):
    """Argument outside the range where the generating function is representable."""


class MultipleZeroError(NumericalError):
    """S'(lambda_n) is numerically zero."""

    def __init__(self, detail: str, index: int):
        super().__init__(detail)
        self.index = index


class ProductUnderflowError(NumericalError):
    """A Carleson product underflows double precision."""

    def __init__(self, detail: str, index: int):
        super().__init__(detail)
        self.index = index


class BiorthogonalityError(NumericalError):
    """A family fails f_n(lambda_k) = delta_nk within tolerance."""


class InterpolationError(PWInterpError):
    """Inconsistent interpolation problem, family or multiplier."""

    exit_code = 6


class ControlError(PWInterpError):
    """Invalid control system or unsolvable moment problem."""

    exit_code = 7


class UnstableEigenvalueError(ControlError):
    """An eigenvalue with Re(lambda) <= 0."""


class UncontrollableModeError(ControlError):
    """b_n = 0 while the n-th target moment is nonzero."""

    def __init__(self, detail: str, index: int):
        super().__init__(detail)
        self.index = index


class GramNotPositiveDefiniteError(ControlError):
    """Cholesky factorisation of the Gram matrix failed."""


EXIT_CODES = {
    "ok": 0,
    "unexpected": PWInterpError.exit_code,
    "unknown-command": 2,
    "config": ConfigError.exit_code,
    "parameter-range": ConfigValidationError.exit_code,
    "numerical": NumericalError.exit_code,
    "domain": SequenceError.exit_code,
    "control": ControlError.exit_code,
}
