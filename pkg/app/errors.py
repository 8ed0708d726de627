"""
Exception hierarchy for the OU bridge toolkit.

Every error carries the process exit code the command-line runner uses
when it reaches the top level.
"""

from typing import Optional


class OUBridgeError(Exception):
    """Root of all toolkit errors."""

    exit_code: int = 5


class InvalidArgumentError(OUBridgeError, ValueError):
    """Bad shapes, non-finite inputs or out-of-range parameters."""

    exit_code = 2


class DomainError(InvalidArgumentError):
    """A time argument outside [0, T], or s > t for two-time queries."""


class ConfigError(InvalidArgumentError):
    """Malformed run configuration or environment setting."""


class DataError(OUBridgeError):
    """
    Malformed input file.

    Args:
        message: Human readable description
        row: Offending row (1-based, header excluded) if known
        column: Offending column name if known
    """

    exit_code = 3

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column '{column}'")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NumericalError(OUBridgeError):
    """Numerical failure: degenerate matrices, divergence, non-convergence."""

    exit_code = 4


class NotPSDError(NumericalError):
    """A matrix expected to be positive semidefinite is not."""


class DegenerateKernelError(NumericalError):
    """The bridge kernel Lambda_t is numerically singular."""


class DegenerateDiffusionError(NumericalError):
    """Phi_T (the reference covariance at the horizon) is singular."""


class DegenerateMarginalError(NumericalError):
    """A Gaussian marginal has a (near) singular covariance."""


class ConvergenceError(NumericalError):
    """An iterative solver did not reach its tolerance."""


class SimulationError(NumericalError):
    """Integrator produced non-finite states."""

    def __init__(self, message: str, step: Optional[int] = None):
        if step is not None:
            message = f"{message} at step {step}"
        super().__init__(message)
        self.step = step


class TrainingError(NumericalError):
    """Training failed on a segment or refit iteration."""

    def __init__(self, message: str, segment: Optional[int] = None, iteration: Optional[int] = None):
        if segment is not None:
            message = f"{message} (segment {segment})"
        if iteration is not None:
            message = f"{message} (refit iteration {iteration})"
        super().__init__(message)
        self.segment = segment
        self.iteration = iteration
