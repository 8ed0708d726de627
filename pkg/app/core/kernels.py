"""
Cached kernel integrals of the OU reference.

    Φ_t = ∫_0^t e^{uA} σσᵀ e^{uAᵀ} du          (covariance of X_t given X_0)
    Λ_t = ∫_0^{T-t} e^{-sA} e^{-sAᵀ} ds
    Λ^σ_t = ∫_0^{T-t} e^{-sA} σσᵀ e^{-sAᵀ} ds  (bridge control kernel; Λ^σ = Λ when σσᵀ = I)

Node values are built by composing one Simpson-integrated step,
Φ_{t+h} = Φ_h + e^{hA} Φ_t e^{hAᵀ}, so the composition law holds along the
grid. Off-grid queries integrate only the tail from the node below with the
same local rule.
"""

import logging
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import simpson

from ..errors import DegenerateDiffusionError, DomainError, InvalidArgumentError, NotPSDError
from .linalg import expm, inv_sqrtm_pd, psd_inverse, sqrtm_psd, symmetrize
from .process import Gaussian, OUProcess

logger = logging.getLogger(__name__)

DEFAULT_NODES = 512
DEFAULT_SUBSTEPS = 8
DEFAULT_CLAMP = 1e-4


class KernelTerms(NamedTuple):
    """Per-time kernel quantities for a batch of times, each with leading axis n."""

    times: np.ndarray
    exp_t: np.ndarray         # e^{tA}
    exp_rest: np.ndarray      # e^{(T-t)A}
    exp_neg_rest: np.ndarray  # e^{-(T-t)A}
    phi: np.ndarray           # Φ_t
    lam: np.ndarray           # Λ_t
    lam_sigma: np.ndarray     # Λ^σ_t = e^{-(T-t)A} Φ_{T-t} e^{-(T-t)Aᵀ}


def _powers(E: np.ndarray, n: int) -> np.ndarray:
    """Stack [I, E, E², ..., Eⁿ] along a new axis 1 for E of shape (b, d, d)."""
    b, d, _ = E.shape
    out = np.empty((b, n + 1, d, d))
    out[:, 0] = np.eye(d)
    for j in range(1, n + 1):
        out[:, j] = out[:, j - 1] @ E
    return out


class KernelCache:
    """
    Immutable grid of e^{tA}, Φ_t, Λ_t and Σ_T^{±1/2} for one (process, T, K).

    Args:
        process: Reference process
        horizon: T > 0
        nodes: Number of grid nodes K (≥ 3)
        substeps: Even number of Simpson subintervals per grid step
        clamp: Relative endpoint clamp; bridge times are kept in [clamp·T, T - clamp·T]
    """

    def __init__(
        self,
        process: OUProcess,
        horizon: float,
        nodes: int = DEFAULT_NODES,
        substeps: int = DEFAULT_SUBSTEPS,
        clamp: float = DEFAULT_CLAMP,
    ):
        if not np.isfinite(horizon) or horizon <= 0:
            raise InvalidArgumentError(f"horizon must be positive, got {horizon}")
        if nodes < 3:
            raise InvalidArgumentError(f"need at least 3 grid nodes, got {nodes}")
        if substeps < 2 or substeps % 2:
            raise InvalidArgumentError(f"substeps must be even and >= 2, got {substeps}")
        if not 0 < clamp < 0.5:
            raise InvalidArgumentError(f"clamp must be in (0, 0.5), got {clamp}")

        self.process = process
        self.horizon = float(horizon)
        self.substeps = int(substeps)
        self.clamp_fraction = float(clamp)
        self.eps = self.clamp_fraction * self.horizon

        A = process.drift
        d = process.dim
        self.grid = np.linspace(0.0, self.horizon, int(nodes))
        self.step = self.grid[1] - self.grid[0]
        self.expA = expm(self.grid[:, None, None] * A)
        self.exp_negA = expm(-self.grid[:, None, None] * A)

        h = np.array([self.step])
        phi_h = self._local_phi(h)[0]
        lam_h = self._local_lam(h)[0]
        E_h = self.expA[1]

        K = len(self.grid)
        phi = np.zeros((K, d, d))
        ell = np.zeros((K, d, d))  # ell[k] = ∫_0^{t_k} e^{-sA}e^{-sAᵀ} ds
        for k in range(K - 1):
            phi[k + 1] = symmetrize(phi_h + E_h @ phi[k] @ E_h.T)
            ell[k + 1] = symmetrize(ell[k] + self.exp_negA[k] @ lam_h @ self.exp_negA[k].T)
        self.phi = phi
        self._ell = ell
        self.lam = ell[::-1].copy()  # Λ_{t_k} = ell(T - t_k) = ell[K-1-k]

        self.phi_T = phi[-1]
        self.sigmaT_root = sqrtm_psd(self.phi_T, "Phi_T")
        try:
            self.sigmaT_invroot: Optional[np.ndarray] = inv_sqrtm_pd(self.phi_T, "Phi_T", min_eig=1e-12)
            self.phi_T_inv: Optional[np.ndarray] = psd_inverse(self.phi_T, "Phi_T")
        except NotPSDError:
            self.sigmaT_invroot = None
            self.phi_T_inv = None
            logger.debug("Phi_T is singular; bridge conditioning unavailable for this cache")

        for arr in (self.grid, self.expA, self.exp_negA, self.phi, self._ell, self.lam, self.sigmaT_root):
            arr.setflags(write=False)
        for arr in (self.sigmaT_invroot, self.phi_T_inv):
            if arr is not None:
                arr.setflags(write=False)

    # ------------------------------------------------------------------
    # local Simpson rules on [0, δ]

    def _local_phi(self, deltas: np.ndarray) -> np.ndarray:
        n = self.substeps
        A = self.process.drift
        Q = self.process.sigma_sq
        P = _powers(expm(deltas[:, None, None] * A / n), n)
        integrand = P @ Q @ np.swapaxes(P, -1, -2)
        return symmetrize(simpson(integrand, dx=1.0 / n, axis=1) * deltas[:, None, None])

    def _local_lam(self, deltas: np.ndarray) -> np.ndarray:
        n = self.substeps
        A = self.process.drift
        P = _powers(expm(-deltas[:, None, None] * A / n), n)
        integrand = P @ np.swapaxes(P, -1, -2)
        return symmetrize(simpson(integrand, dx=1.0 / n, axis=1) * deltas[:, None, None])

    # ------------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.process.dim

    def require_conditioning(self) -> None:
        """
        Raises:
            DegenerateDiffusionError: If Φ_T is singular
        """
        if self.phi_T_inv is None:
            raise DegenerateDiffusionError("Phi_T is singular; the diffusion does not reach every direction")

    def clamp(self, t):
        """Clamp times into [ε_t, T - ε_t]."""
        return np.clip(t, self.eps, self.horizon - self.eps)

    def check_times(self, t) -> np.ndarray:
        """
        Validate times against [0, T] (with a 1e-12·T tolerance).

        Raises:
            DomainError: If any time is outside the horizon
        """
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        tol = 1e-12 * self.horizon
        if not np.all(np.isfinite(ts)) or np.any(ts < -tol) or np.any(ts > self.horizon + tol):
            raise DomainError(f"time outside [0, {self.horizon}]: {ts[(ts < -tol) | (ts > self.horizon + tol)]}")
        return np.clip(ts, 0.0, self.horizon)

    def _locate(self, ts: np.ndarray):
        K = len(self.grid)
        k = np.floor(ts / self.step).astype(int)
        k = np.clip(k, 0, K - 1)
        delta = ts - self.grid[k]
        on_node = np.abs(delta) <= 1e-12 * self.horizon
        # snap to the upper node when t sits just below it
        near_up = (k < K - 1) & (np.abs(self.grid[np.minimum(k + 1, K - 1)] - ts) <= 1e-12 * self.horizon)
        k = np.where(near_up, k + 1, k)
        on_node = on_node | near_up
        k = np.where(~on_node & (k == K - 1), K - 2, k)
        delta = np.where(on_node, 0.0, ts - self.grid[k])
        return k, delta, on_node

    def exp(self, t) -> np.ndarray:
        """e^{tA} for any real t (scalar or array)."""
        ts = np.asarray(t, dtype=float)
        return expm(ts[..., None, None] * self.process.drift)

    def terms(self, t) -> KernelTerms:
        """
        Kernel quantities at a batch of times.

        Args:
            t: Scalar or 1-d array of times in [0, T]

        Returns:
            KernelTerms with arrays of shape (n, d, d)
        """
        ts = self.check_times(t)
        K = len(self.grid)
        k, delta, on_node = self._locate(ts)
        A = self.process.drift

        E_d = expm(delta[:, None, None] * A)
        E_nd = expm(-delta[:, None, None] * A)
        exp_t = E_d @ self.expA[k]
        j = K - 1 - k
        exp_rest = self.expA[j] @ E_nd
        exp_neg_rest = self.exp_negA[j] @ E_d

        phi = self.phi[k].copy()
        lam = self.lam[k].copy()
        phi_rest = self.phi[j].copy()  # Φ_{T-t}
        off = ~on_node
        if np.any(off):
            dk = delta[off]
            ko = k[off]
            phi[off] = symmetrize(self._local_phi(dk) + E_d[off] @ self.phi[ko] @ np.swapaxes(E_d[off], -1, -2))
            # T - t lies in (t_{j-1}, t_j); integrate the remainder past t_{j-1}
            jo = j[off] - 1
            rem = (self.horizon - ts[off]) - self.grid[jo]
            rem = np.clip(rem, 0.0, self.step)
            En = self.exp_negA[jo]
            lam[off] = symmetrize(self._ell[jo] + En @ self._local_lam(rem) @ np.swapaxes(En, -1, -2))
            Er = expm(rem[:, None, None] * A)
            phi_rest[off] = symmetrize(self._local_phi(rem) + Er @ self.phi[jo] @ np.swapaxes(Er, -1, -2))
        lam_sigma = symmetrize(exp_neg_rest @ phi_rest @ np.swapaxes(exp_neg_rest, -1, -2))
        return KernelTerms(ts, exp_t, exp_rest, exp_neg_rest, phi, lam, lam_sigma)

    def phi_at(self, t) -> np.ndarray:
        """Φ_t for a scalar time."""
        return self.terms(t).phi[0]

    def lam_at(self, t) -> np.ndarray:
        """Λ_t for a scalar time."""
        return self.terms(t).lam[0]

    def lam_sigma_at(self, t) -> np.ndarray:
        """Λ^σ_t for a scalar time."""
        return self.terms(t).lam_sigma[0]

    def describe(self) -> str:
        return (f"KernelCache(d={self.dim}, T={self.horizon:g}, K={len(self.grid)}, "
                f"substeps={self.substeps}, eps_t={self.eps:.3g})")


def phi(cache: KernelCache, t: float) -> np.ndarray:
    """Φ_t = ∫_0^t e^{(t-s)A} σσᵀ e^{(t-s)Aᵀ} ds."""
    return cache.phi_at(t)


def lam(cache: KernelCache, t: float) -> np.ndarray:
    """Λ_t = ∫_0^{T-t} e^{-sA} e^{-sAᵀ} ds."""
    return cache.lam_at(t)


def lam_sigma(cache: KernelCache, t: float) -> np.ndarray:
    """Λ^σ_t = ∫_0^{T-t} e^{-sA} σσᵀ e^{-sAᵀ} ds."""
    return cache.lam_sigma_at(t)


def unconditional_moments(process: OUProcess, cache: KernelCache, x0: np.ndarray, t: float) -> Gaussian:
    """
    Law of X_t given X_0 = x0 under the reference.

    Returns:
        Gaussian with mean e^{tA}(x0 - m) + m and covariance Φ_t
    """
    terms = cache.terms(t)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != process.dim:
        raise InvalidArgumentError(f"x0 must have length {process.dim}")
    mean = terms.exp_t[0] @ (x0 - process.target) + process.target
    return Gaussian(mean, terms.phi[0])
