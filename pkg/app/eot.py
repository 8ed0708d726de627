"""
Discrete entropic transport between sample clouds under the OU log-kernel cost.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .core.kernels import KernelCache
from .errors import InvalidArgumentError

logger = logging.getLogger(__name__)

RECENTER_EVERY = 10
CHECK_EVERY = 10


@dataclass(frozen=True)
class Coupling:
    """
    Entropic transport plan with its dual potentials.

    The plan is π_ij = exp((f_i + g_j - C_ij) / ε).
    """

    plan: np.ndarray
    f: np.ndarray
    g: np.ndarray
    epsilon: float
    iterations: int
    marginal_error: float
    converged: bool

    @property
    def shape(self):
        return self.plan.shape


def mvou_cost(cache: KernelCache, X0: np.ndarray, XT: np.ndarray, threads: int = 1) -> np.ndarray:
    """
    Negative log transition kernel (up to constants) between sample clouds.

        C_ij = ½ (x'_j - μ_T^{x_i})ᵀ Σ_T⁻¹ (x'_j - μ_T^{x_i})

    Args:
        cache: Kernel cache over the segment
        X0: Source samples (N, d)
        XT: Target samples (N', d)
        threads: Row-chunk workers; the result does not depend on it

    Raises:
        DegenerateDiffusionError: If Σ_T is singular
    """
    cache.require_conditioning()
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    XT = np.atleast_2d(np.asarray(XT, dtype=float))
    d = cache.dim
    if X0.shape[1] != d or XT.shape[1] != d:
        raise InvalidArgumentError(f"sample clouds must have {d} columns")
    m = cache.process.target
    Ri = cache.sigmaT_invroot
    Y0 = ((X0 - m) @ cache.expA[-1].T + m) @ Ri
    Y1 = XT @ Ri

    if threads <= 1 or len(Y0) < 2 * threads:
        return 0.5 * cdist(Y0, Y1, "sqeuclidean")
    chunks = np.array_split(np.arange(len(Y0)), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda idx: 0.5 * cdist(Y0[idx], Y1, "sqeuclidean"), chunks))
    return np.vstack(parts)


def _check_weights(w: np.ndarray, n: int, name: str) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != n:
        raise InvalidArgumentError(f"{name} has length {w.shape[0]}, expected {n}")
    if np.any(w <= 0) or not np.all(np.isfinite(w)) or abs(w.sum() - 1.0) > 1e-8:
        raise InvalidArgumentError(f"{name} must be strictly positive and sum to 1")
    return w


def sinkhorn(
    cost: np.ndarray,
    a: Optional[np.ndarray] = None,
    b: Optional[np.ndarray] = None,
    epsilon: float = 1.0,
    max_iters: int = 10_000,
    tol: float = 1e-8,
) -> Coupling:
    """
    Log-domain Sinkhorn iterations.

    Args:
        cost: (N, N') cost matrix
        a: Source weights (uniform if None)
        b: Target weights (uniform if None)
        epsilon: Entropic regularization
        max_iters: Iteration cap
        tol: Target ℓ1 marginal violation

    Returns:
        Coupling; ``converged`` is False when max_iters was reached

    Raises:
        InvalidArgumentError: On invalid weights, epsilon or cost
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.size == 0 or not np.all(np.isfinite(C)):
        raise InvalidArgumentError("cost must be a finite non-empty matrix")
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    N, M = C.shape
    a = np.full(N, 1.0 / N) if a is None else _check_weights(a, N, "source weights")
    b = np.full(M, 1.0 / M) if b is None else _check_weights(b, M, "target weights")
    log_a, log_b = np.log(a), np.log(b)

    f = np.zeros(N)
    g = np.zeros(M)
    error = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        f = epsilon * (log_a - logsumexp((g[None, :] - C) / epsilon, axis=1))
        g = epsilon * (log_b - logsumexp((f[:, None] - C) / epsilon, axis=0))
        if it % RECENTER_EVERY == 0:
            shift = 0.5 * (g.max() - f.max())
            f, g = f + shift, g - shift
        if it % CHECK_EVERY == 0:
            log_plan = (f[:, None] + g[None, :] - C) / epsilon
            plan = np.exp(log_plan)
            error = np.abs(plan.sum(axis=1) - a).sum() + np.abs(plan.sum(axis=0) - b).sum()
            if error < tol:
                break

    plan = np.exp((f[:, None] + g[None, :] - C) / epsilon)
    error = np.abs(plan.sum(axis=1) - a).sum() + np.abs(plan.sum(axis=0) - b).sum()
    converged = bool(error < tol)
    if not converged:
        logger.warning("Sinkhorn stopped after %d iterations with marginal error %.3e", it, error)
    return Coupling(plan, f, g, float(epsilon), it, float(error), converged)


def sample_coupling(coupling: Coupling, batch: int, seed: int | np.random.Generator | None = None) -> np.ndarray:
    """
    Draw i.i.d. index pairs from the plan.

    Returns:
        Integer array (batch, 2) of (source index, target index)
    """
    rng = np.random.default_rng(seed)
    flat = coupling.plan.ravel()
    cdf = np.cumsum(flat / flat.sum())
    u = rng.random(int(batch))
    cells = np.searchsorted(cdf, u, side="right")
    cells = np.minimum(cells, flat.size - 1)
    rows, cols = np.divmod(cells, coupling.plan.shape[1])
    return np.stack([rows, cols], axis=1)
