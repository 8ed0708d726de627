"""
Synthetic data generators: Gaussian and mixture benchmarks, the repressilator
circuit and exact OU snapshots.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from ..core.kernels import KernelCache
from ..core.linalg import random_orthogonal
from ..core.process import Gaussian, OUProcess
from ..errors import InvalidArgumentError
from .integrators import euler_maruyama

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Snapshot:
    """Samples of the population observed at one time."""

    time: float
    samples: np.ndarray

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def check_snapshots(snapshots: Sequence[Snapshot], minimum: int = 2) -> List[Snapshot]:
    """
    Validate a snapshot series: count, shared dimension, strictly increasing times.
    """
    snaps = list(snapshots)
    if len(snaps) < minimum:
        raise InvalidArgumentError(f"need at least {minimum} snapshots, got {len(snaps)}")
    d = snaps[0].dim
    for s in snaps:
        if s.samples.ndim != 2 or s.dim != d or s.size < 1:
            raise InvalidArgumentError("snapshots must be non-empty (n, d) arrays with a common d")
    times = np.array([s.time for s in snaps])
    if np.any(np.diff(times) <= 0):
        raise InvalidArgumentError("snapshot times must be strictly increasing")
    return snaps


# ----------------------------------------------------------------------
# Gaussian benchmark

BENCH_DRIFT = np.array([[0.0, 1.0], [-2.5, 0.0]])
BENCH_TARGET = np.array([1.0, -1.0])
BENCH_MEAN0 = np.array([-2.5, -0.5])
BENCH_COV0 = np.array([[0.1, 0.005], [0.005, 0.1]])
BENCH_MEAN1 = np.array([0.5, 2.5])
# the stated target covariance [[1.1, -2], [-2, 1.1]] is indefinite; its PSD projection is used
_w, _V = np.linalg.eigh(np.array([[1.1, -2.0], [-2.0, 1.1]]))
BENCH_COV1 = (_V * np.maximum(_w, 0.0)) @ _V.T


@dataclass
class GaussianBenchmark:
    """Process, exact marginals and samples of the Gaussian benchmark."""

    process: OUProcess
    rho0: Gaussian
    rho1: Gaussian
    samples0: np.ndarray
    samples1: np.ndarray
    embedding: np.ndarray


def embedding(d: int, rng: np.random.Generator) -> np.ndarray:
    """First two columns of a random orthogonal d×d matrix."""
    return random_orthogonal(d, rng)[:, :2]


def gaussian_benchmark(
    d: int,
    seed: int = 0,
    n: int = 128,
    U: Optional[np.ndarray] = None,
) -> GaussianBenchmark:
    """
    Rotational OU benchmark embedded in d dimensions.

    A = U[[0,1],[-2.5,0]]Uᵀ, m = U(1,-1), σ = I, with marginals
    N(U(-2.5,-0.5), UΣ₀Uᵀ + 0.1I) and N(U(0.5,2.5), UΣ₁Uᵀ + 0.1I), with Σ₁ the
    PSD part of [[1.1,-2],[-2,1.1]].

    Args:
        d: Ambient dimension (≥ 2)
        seed: Seed for U and the samples
        n: Samples per marginal
        U: Optional fixed d×2 embedding

    Raises:
        InvalidArgumentError: If d < 2
    """
    if d < 2:
        raise InvalidArgumentError("the benchmark needs d >= 2")
    rng = np.random.default_rng(seed)
    U = embedding(d, rng) if U is None else np.asarray(U, dtype=float)
    if U.shape != (d, 2):
        raise InvalidArgumentError(f"embedding must be {d}x2")
    I = np.eye(d)
    process = OUProcess(U @ BENCH_DRIFT @ U.T, U @ BENCH_TARGET, I)
    rho0 = Gaussian(U @ BENCH_MEAN0, U @ BENCH_COV0 @ U.T + 0.1 * I)
    rho1 = Gaussian(U @ BENCH_MEAN1, U @ BENCH_COV1 @ U.T + 0.1 * I)
    return GaussianBenchmark(process, rho0, rho1, rho0.sample(n, rng), rho1.sample(n, rng), U)


@dataclass
class MixtureBenchmark:
    """Two-component Gaussian mixtures at t = 0 and t = 1."""

    process: OUProcess
    samples0: np.ndarray
    samples1: np.ndarray
    labels0: np.ndarray
    labels1: np.ndarray
    embedding: np.ndarray


def gaussian_mixture_data(d: int, seed: int = 0, n: int = 128, U: Optional[np.ndarray] = None) -> MixtureBenchmark:
    """
    Mixture benchmark sharing the Gaussian benchmark's reference.

    Components at t = 0: U(-0.5,-0.5) with 0.01UUᵀ and U(0.5,0.5) with
    0.0625UUᵀ; at t = 1: U(-2.5,-2.5) with 0.01UUᵀ and U(2.5,2.5) with
    0.25UUᵀ; equal weights.
    """
    if d < 2:
        raise InvalidArgumentError("the benchmark needs d >= 2")
    rng = np.random.default_rng(seed)
    U = embedding(d, rng) if U is None else np.asarray(U, dtype=float)
    process = OUProcess(U @ BENCH_DRIFT @ U.T, U @ BENCH_TARGET, np.eye(d))

    def draw(means, scales):
        labels = rng.integers(0, 2, size=n)
        Z = rng.standard_normal((n, 2))
        out = np.empty((n, d))
        for j in (0, 1):
            mask = labels == j
            out[mask] = U @ np.asarray(means[j]) + np.sqrt(scales[j]) * Z[mask] @ U.T
        return out, labels

    X0, l0 = draw([(-0.5, -0.5), (0.5, 0.5)], [0.01, 0.0625])
    X1, l1 = draw([(-2.5, -2.5), (2.5, 2.5)], [0.01, 0.25])
    return MixtureBenchmark(process, X0, X1, l0, l1, U)


def scale_drift(process: OUProcess, gamma: float) -> OUProcess:
    """Same process with drift γA."""
    if not np.isfinite(gamma) or gamma < 0:
        raise InvalidArgumentError(f"gamma must be nonnegative, got {gamma}")
    return OUProcess(gamma * process.drift, process.target, process.diffusion)


def planted_ou_snapshots(
    process: OUProcess,
    rho0: Gaussian,
    times: Sequence[float],
    n: int,
    seed: int = 0,
) -> List[Snapshot]:
    """
    Exact marginal samples of an OU process started from a Gaussian.

    X_t ~ N(e^{tA}(μ₀ - m) + m, e^{tA}Σ₀e^{tAᵀ} + Φ_t); no time discretisation.
    """
    times = np.asarray(times, dtype=float)
    if times[0] < 0 or np.any(np.diff(times) <= 0):
        raise InvalidArgumentError("times must be nonnegative and increasing")
    rng = np.random.default_rng(seed)
    horizon = float(times[-1]) if times[-1] > 0 else 1.0
    cache = KernelCache(process, horizon, nodes=257)
    terms = cache.terms(times)
    m = process.target
    out = []
    for t, E, P in zip(times, terms.exp_t, terms.phi):
        law = Gaussian(E @ (rho0.mean - m) + m, E @ rho0.cov @ E.T + P)
        out.append(Snapshot(float(t), law.sample(n, rng)))
    return out


# ----------------------------------------------------------------------
# Repressilator


@dataclass(frozen=True)
class RepressilatorParams:
    """Hill-type cyclic repression: dx_i = (β/(1+(x_{i-1}/k)^n) - γ x_i)dt + σ dB_i."""

    beta: float = 10.0
    n: float = 3.0
    k: float = 1.0
    gamma: float = 1.0
    sigma: float = 0.1
    initial_mean: tuple = (1.0, 1.0, 2.0)
    initial_var: float = 0.01

    def __post_init__(self):
        for name in ("beta", "n", "k", "gamma"):
            if getattr(self, name) <= 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.sigma < 0 or self.initial_var < 0:
            raise InvalidArgumentError("sigma and initial_var must be nonnegative")


def repressilator_drift(params: RepressilatorParams, X: np.ndarray) -> np.ndarray:
    """Drift for states X of shape (n, 3); gene i is repressed by gene i-1."""
    X = np.atleast_2d(X)
    repressor = np.roll(X, 1, axis=1)
    hill = (np.maximum(repressor, 0.0) / params.k) ** params.n
    return params.beta / (1.0 + hill) - params.gamma * X


def repressilator_jacobian(params: RepressilatorParams, x: np.ndarray) -> np.ndarray:
    """Analytic Jacobian of the drift at x (x > 0 componentwise)."""
    x = np.asarray(x, dtype=float)
    J = -params.gamma * np.eye(3)
    for i in range(3):
        j = (i - 1) % 3
        u = max(x[j], 0.0) / params.k
        J[i, j] = -params.beta * params.n * u ** (params.n - 1) / params.k / (1.0 + u ** params.n) ** 2
    return J


def inhibition_pattern_match(A: np.ndarray, jacobian: np.ndarray, tol: float = 1e-12) -> bool:
    """True when every nonzero off-diagonal entry of ``jacobian`` has the same sign in ``A``."""
    A = np.asarray(A, dtype=float)
    J = np.asarray(jacobian, dtype=float)
    mask = (np.abs(J) > tol) & ~np.eye(J.shape[0], dtype=bool)
    return bool(np.all(np.sign(A[mask]) == np.sign(J[mask])))


def repressilator_fixed_point(params: RepressilatorParams) -> np.ndarray:
    """Symmetric fixed point x* solving β/(1 + (x/k)^n) = γx."""
    f = lambda x: params.beta / (1.0 + (x / params.k) ** params.n) - params.gamma * x
    root = brentq(f, 0.0, params.beta / params.gamma + 1.0)
    return np.full(3, root)


def repressilator_snapshots(
    params: RepressilatorParams = RepressilatorParams(),
    n_per_snapshot: int = 100,
    snapshot_times: Optional[Sequence[float]] = None,
    seed: int = 0,
    dt: float = 1e-3,
    threads: int = 1,
) -> List[Snapshot]:
    """
    Snapshots of independent repressilator trajectories.

    Each snapshot's samples come from their own trajectories, simulated with
    Euler-Maruyama from N(initial_mean, initial_var·I). Snapshot j uses the
    derived seed (seed, j), so the result does not depend on ``threads``.

    Args:
        params: Circuit parameters
        n_per_snapshot: Samples per snapshot
        snapshot_times: Observation times (default 10 points on [0, 10])
        seed: Base seed
        dt: Euler step
        threads: Parallel workers over snapshots
    """
    times = np.linspace(0.0, 10.0, 10) if snapshot_times is None else np.asarray(snapshot_times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise InvalidArgumentError("snapshot times must be nonnegative and increasing")
    sigma = params.sigma * np.eye(3)
    drift = lambda t, X: repressilator_drift(params, X)

    def run(j: int) -> Snapshot:
        rng = np.random.default_rng([seed, j])
        x0 = np.asarray(params.initial_mean) + np.sqrt(params.initial_var) * rng.standard_normal((n_per_snapshot, 3))
        t_end = float(times[j])
        if t_end == 0.0:
            return Snapshot(0.0, x0)
        steps = max(int(round(t_end / dt)), 1)
        grid = np.linspace(0.0, t_end, steps + 1)
        traj = euler_maruyama(drift, sigma, x0, grid, seed=rng, save_times=[t_end])
        return Snapshot(t_end, traj.final)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            snaps = list(pool.map(run, range(len(times))))
    else:
        snaps = [run(j) for j in range(len(times))]
    logger.info("simulated %d repressilator snapshots of %d samples", len(snaps), n_per_snapshot)
    return snaps
