"""
Integrators and synthetic data generators.
"""

from .integrators import Trajectory, euler_maruyama, rk4
from .generators import (
    Snapshot,
    check_snapshots,
    GaussianBenchmark,
    MixtureBenchmark,
    RepressilatorParams,
    gaussian_benchmark,
    gaussian_mixture_data,
    scale_drift,
    planted_ou_snapshots,
    repressilator_drift,
    repressilator_jacobian,
    repressilator_fixed_point,
    inhibition_pattern_match,
    repressilator_snapshots,
)

__all__ = [
    'Trajectory',
    'euler_maruyama',
    'rk4',
    'Snapshot',
    'check_snapshots',
    'GaussianBenchmark',
    'MixtureBenchmark',
    'RepressilatorParams',
    'gaussian_benchmark',
    'gaussian_mixture_data',
    'scale_drift',
    'planted_ou_snapshots',
    'repressilator_drift',
    'repressilator_jacobian',
    'repressilator_fixed_point',
    'inhibition_pattern_match',
    'repressilator_snapshots',
]
