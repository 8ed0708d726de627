"""
Fixed-step SDE and ODE integrators over batches of paths.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import InvalidArgumentError, SimulationError

Field = Callable[[float, np.ndarray], np.ndarray]


@dataclass
class Trajectory:
    """
    Saved states of one or many paths.

    Attributes:
        times: Saved times (k,)
        states: (k, d) for a single path or (k, n, d) for a batch
        seed: Seed used for the noise (None for deterministic runs)
    """

    times: np.ndarray
    states: np.ndarray
    seed: Optional[object] = None

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise InvalidArgumentError("times and states must have matching lengths")

    def at(self, index: int) -> np.ndarray:
        return self.states[index]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _prepare(x0: np.ndarray, grid: Sequence[float], save_times: Optional[Sequence[float]]):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
        raise InvalidArgumentError("grid must be strictly increasing with at least 2 points")
    x = np.asarray(x0, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x).copy()
    if save_times is None:
        keep = np.arange(len(grid))
    else:
        keep = np.array([int(np.argmin(np.abs(grid - s))) for s in save_times])
        if np.any(np.abs(grid[keep] - np.asarray(save_times, dtype=float)) > 1e-9 * max(1.0, abs(grid[-1]))):
            raise InvalidArgumentError("save_times must lie on the integration grid")
        keep = np.unique(keep)
    return grid, X, single, keep


def _finish(grid, saved, keep, single, seed) -> Trajectory:
    states = np.stack(saved)
    if single:
        states = states[:, 0, :]
    return Trajectory(grid[keep], states, seed)


def euler_maruyama(
    drift: Field,
    sigma: np.ndarray,
    x0: np.ndarray,
    grid: Sequence[float],
    seed: int | Sequence[int] | np.random.Generator | None = None,
    save_times: Optional[Sequence[float]] = None,
) -> Trajectory:
    """
    Euler-Maruyama: X_{k+1} = X_k + f(t_k, X_k)Δt + σ √Δt ξ_k.

    Args:
        drift: Field (t, X[n,d]) -> (n,d)
        sigma: d×d' diffusion matrix
        x0: Initial state (d,) or batch (n, d)
        grid: Increasing time grid
        seed: Seed, seed sequence entropy or generator
        save_times: Grid times to record (default all)

    Raises:
        SimulationError: If drift or state becomes non-finite
    """
    grid, X, single, keep = _prepare(x0, grid, save_times)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma.shape[0] != X.shape[1]:
        raise InvalidArgumentError(f"sigma must have {X.shape[1]} rows")
    rng = np.random.default_rng(seed)
    keep_set = set(keep.tolist())
    saved = [X.copy()] if 0 in keep_set else []
    noisy = np.any(sigma != 0)
    for k in range(len(grid) - 1):
        dt = grid[k + 1] - grid[k]
        f = drift(grid[k], X)
        if not np.all(np.isfinite(f)):
            raise SimulationError("drift returned non-finite values", step=k)
        X = X + f * dt
        if noisy:
            X = X + np.sqrt(dt) * rng.standard_normal((X.shape[0], sigma.shape[1])) @ sigma.T
        if not np.all(np.isfinite(X)):
            raise SimulationError("state became non-finite", step=k + 1)
        if k + 1 in keep_set:
            saved.append(X.copy())
    return _finish(grid, saved, keep, single, seed if not isinstance(seed, np.random.Generator) else None)


def rk4(
    flow: Field,
    x0: np.ndarray,
    grid: Sequence[float],
    save_times: Optional[Sequence[float]] = None,
) -> Trajectory:
    """
    Classical fourth-order Runge-Kutta for the ODE dx/dt = flow(t, x).

    Raises:
        SimulationError: If the state becomes non-finite
    """
    grid, X, single, keep = _prepare(x0, grid, save_times)
    keep_set = set(keep.tolist())
    saved = [X.copy()] if 0 in keep_set else []
    for k in range(len(grid) - 1):
        t, h = grid[k], grid[k + 1] - grid[k]
        k1 = flow(t, X)
        k2 = flow(t + 0.5 * h, X + 0.5 * h * k1)
        k3 = flow(t + 0.5 * h, X + 0.5 * h * k2)
        k4 = flow(t + h, X + h * k3)
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(X)):
            raise SimulationError("state became non-finite", step=k + 1)
        if k + 1 in keep_set:
            saved.append(X.copy())
    return _finish(grid, saved, keep, single, None)
