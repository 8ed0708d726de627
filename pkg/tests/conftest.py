"""Shared fixtures: reference processes, kernel caches and generators."""

import numpy as np
import pytest

from app.core import KernelCache, OUProcess

ROTATION_DRIFT = np.array([[0.0, 1.0], [-2.5, 0.0]])
DAMPED_DRIFT = np.array([[-0.5, 1.0], [-1.0, -0.8]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def brownian():
    return OUProcess.brownian(2)


@pytest.fixture
def rotation():
    """Non-gradient OU reference with the benchmark's rotation drift."""
    return OUProcess(ROTATION_DRIFT, np.array([1.0, -1.0]), np.eye(2))


@pytest.fixture
def damped():
    """Stable asymmetric drift with a non-isotropic diffusion."""
    return OUProcess(DAMPED_DRIFT, np.array([0.3, -0.2]), np.array([[1.0, 0.0], [0.4, 0.7]]))


@pytest.fixture
def brownian_cache(brownian):
    return KernelCache(brownian, 1.0, nodes=257)


@pytest.fixture
def rotation_cache(rotation):
    return KernelCache(rotation, 1.0, nodes=257)


@pytest.fixture
def damped_cache(damped):
    return KernelCache(damped, 1.0, nodes=257)
