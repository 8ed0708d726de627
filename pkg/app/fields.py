"""
Vector fields behind one interface, with a small registry.

Every field is called as ``field(t, X)`` with X of shape (n, d) and returns (n, d).
"""

from abc import ABC, abstractmethod
from typing import Dict, Type

import numpy as np

from .bridge import BridgePin, batch_flow, bridge_terms
from .core.kernels import KernelCache
from .core.process import OUProcess
from .errors import InvalidArgumentError
from .fm.checkpoint import Checkpoint
from .gsb import GSBSolution


class VectorField(ABC):
    """Abstract time-dependent vector field."""

    name: str = "field"

    @abstractmethod
    def __call__(self, t: float, X: np.ndarray) -> np.ndarray:
        """
        Evaluate the field.

        Args:
            t: Time
            X: States (n, d)

        Returns:
            Velocities (n, d)
        """
        pass


class ReferenceDriftField(VectorField):
    """A(x - m) of the reference."""

    name = "reference"

    def __init__(self, process: OUProcess):
        self.process = process

    def __call__(self, t, X):
        return self.process.drift_field(np.atleast_2d(X))


class LinearField(VectorField):
    """x ↦ Mx + c."""

    name = "linear"

    def __init__(self, matrix: np.ndarray, offset: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=float)
        self.offset = np.asarray(offset, dtype=float)

    def __call__(self, t, X):
        return np.atleast_2d(X) @ self.matrix.T + self.offset


class BridgeFlowField(VectorField):
    """Probability flow of one pinned bridge (times clamped)."""

    name = "bridge-flow"

    def __init__(self, cache: KernelCache, pin: BridgePin):
        self.cache = cache
        self.pin = pin

    def __call__(self, t, X):
        X = np.atleast_2d(X)
        ts = np.full(len(X), float(self.cache.clamp(self.cache.check_times(t))[0]))
        terms = bridge_terms(self.cache, ts, np.tile(self.pin.x0, (len(X), 1)), np.tile(self.pin.xT, (len(X), 1)))
        return batch_flow(self.cache, terms, X)


class GSBDriftField(VectorField):
    """Drift of the Gaussian bridge's generating SDE."""

    name = "gsb-drift"

    def __init__(self, solution: GSBSolution):
        self.solution = solution

    def __call__(self, t, X):
        return np.atleast_2d(self.solution.drift(t, X))


class LearnedDriftField(VectorField):
    """u_θ + D s_φ from a checkpoint."""

    name = "learned-drift"

    def __init__(self, checkpoint: Checkpoint):
        self.checkpoint = checkpoint

    def __call__(self, t, X):
        return self.checkpoint.drift(t, np.atleast_2d(X))


class LearnedFlowField(VectorField):
    """u_θ from a checkpoint (probability-flow ODE)."""

    name = "learned-flow"

    def __init__(self, checkpoint: Checkpoint):
        self.checkpoint = checkpoint

    def __call__(self, t, X):
        return self.checkpoint.flow(t, np.atleast_2d(X))


_FIELDS: Dict[str, Type[VectorField]] = {
    cls.name: cls
    for cls in (ReferenceDriftField, LinearField, BridgeFlowField, GSBDriftField, LearnedDriftField, LearnedFlowField)
}


def register_field(kind: str, field_class: Type[VectorField]) -> None:
    """Register a custom field type."""
    if not issubclass(field_class, VectorField):
        raise TypeError(f"Field class must inherit from VectorField, got {field_class.__name__}")
    _FIELDS[kind] = field_class


def get_field(kind: str, *args, **kwargs) -> VectorField:
    """
    Build a field by registry name.

    Raises:
        InvalidArgumentError: If the kind is unknown
    """
    field_class = _FIELDS.get(kind)
    if field_class is None:
        raise InvalidArgumentError(f"Unsupported field: {kind}. Supported: {', '.join(sorted(_FIELDS))}")
    return field_class(*args, **kwargs)
