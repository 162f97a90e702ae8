"""Exception types raised across splitting_kit.

Every error derives from the builtin the CLI already handles
(ValueError / RuntimeError), so ``main`` can report them uniformly.
"""

from typing import Optional


class SplittingKitError(Exception):
    """Base class for all package errors."""


class ScenarioError(SplittingKitError, ValueError):
    """Scenario file could not be parsed or validated."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OutOfGridError(SplittingKitError, ValueError):
    """A time or coordinate lies outside the grid it is evaluated on."""


class GapConditionError(SplittingKitError, ValueError):
    """Spectral gap too small for the graph transform to contract."""


class DegenerateGapError(SplittingKitError, RuntimeError):
    """Singular values at the requested cut are not separated."""

    def __init__(self, message: str, ratio: float):
        self.ratio = ratio
        super().__init__(message)


class ContractionError(SplittingKitError, RuntimeError):
    """Fixed-point iteration stopped contracting."""

    def __init__(self, message: str, measured_factor: float, nu_bound: float):
        self.measured_factor = measured_factor
        self.nu_bound = nu_bound
        super().__init__(message)


class BlowUpError(SplittingKitError, RuntimeError):
    """Trajectory norm exceeded the configured ceiling."""


class NestednessError(SplittingKitError, ValueError):
    """Two splittings are not ordered the way the caller claims."""


class PullbackError(SplittingKitError, RuntimeError):
    """Pullback integration failed to locate a bounded global solution."""


class ResidualError(SplittingKitError, RuntimeError):
    """A numerical consistency check failed."""
