"""
Statistics of the OU reference pinned at both ends.

For a pin (x0, xT, T) and time t the conditioned process is Gaussian with

    mean  μ_t^{x0} + Γ_t (xT - μ_T^{x0}),      Γ_t = Φ_t e^{(T-t)Aᵀ} Φ_T⁻¹
    cov   Ω_t = Φ_t - Γ_t e^{(T-t)A} Φ_t

and is generated by the reference drift plus the control -σσᵀ(Λ^σ_t)⁻¹(y - k_t),
which is -Λ_t⁻¹(y - k_t) when σσᵀ = I.
The batched helpers take arrays of times and pins and are what the
training loop uses; the scalar operations wrap them.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core.kernels import KernelCache, KernelTerms
from .core.linalg import psd_factor, psd_inverse, symmetrize
from .errors import DomainError, InvalidArgumentError


@dataclass(frozen=True)
class BridgePin:
    """Endpoint states and horizon of a bridge."""

    x0: np.ndarray
    xT: np.ndarray
    horizon: float

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        xT = np.asarray(self.xT, dtype=float).reshape(-1)
        if x0.shape != xT.shape:
            raise InvalidArgumentError("x0 and xT must have the same length")
        if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(xT))):
            raise InvalidArgumentError("bridge endpoints must be finite")
        if not np.isfinite(self.horizon) or self.horizon <= 0:
            raise InvalidArgumentError("bridge horizon must be positive")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xT", xT)


@dataclass(frozen=True)
class BridgeMoments:
    """Mean μ_{t|x0,xT} and covariance Ω_t of the bridge at one time."""

    mean: np.ndarray
    cov: np.ndarray


class BridgeTerms(NamedTuple):
    """Batched bridge quantities, leading axis n."""

    kernel: KernelTerms
    gain: np.ndarray   # Γ_t
    omega: np.ndarray  # Ω_t
    mean: np.ndarray   # (n, d)
    pull: np.ndarray   # k_t, (n, d)


def _check_pin(cache: KernelCache, pin: BridgePin) -> None:
    if pin.x0.shape[0] != cache.dim:
        raise InvalidArgumentError(f"pin dimension {pin.x0.shape[0]} does not match process dimension {cache.dim}")
    if abs(pin.horizon - cache.horizon) > 1e-12 * cache.horizon:
        raise InvalidArgumentError(f"pin horizon {pin.horizon} differs from cache horizon {cache.horizon}")


def bridge_terms(cache: KernelCache, t, x0: np.ndarray, xT: np.ndarray) -> BridgeTerms:
    """
    Bridge mean, covariance and pull target for batches of times and pins.

    Args:
        cache: Kernel cache of the reference over [0, T]
        t: Times, shape (n,), already validated/clamped by the caller
        x0: Start states, shape (n, d)
        xT: End states, shape (n, d)

    Raises:
        DegenerateDiffusionError: If Φ_T is singular
    """
    cache.require_conditioning()
    kt = cache.terms(t)
    m = cache.process.target
    E_T = cache.expA[-1]
    x0 = np.atleast_2d(x0)
    xT = np.atleast_2d(xT)

    gain = kt.phi @ np.swapaxes(kt.exp_rest, -1, -2) @ cache.phi_T_inv
    omega = symmetrize(kt.phi - gain @ kt.exp_rest @ kt.phi)
    mu_t = np.einsum("nij,nj->ni", kt.exp_t, x0 - m) + m
    mu_T = (x0 - m) @ E_T.T + m
    mean = mu_t + np.einsum("nij,nj->ni", gain, xT - mu_T)
    pull = np.einsum("nij,nj->ni", kt.exp_neg_rest, xT - m) + m
    return BridgeTerms(kt, gain, omega, mean, pull)


def batch_control(cache: KernelCache, terms: BridgeTerms, y: np.ndarray) -> np.ndarray:
    """c = -σσᵀ(Λ^σ_t)⁻¹(y - k_t) row-wise."""
    lam_inv = psd_inverse(terms.kernel.lam_sigma, "Lambda_t")
    return -np.einsum("nij,nj->ni", lam_inv, y - terms.pull) @ cache.process.sigma_sq.T


def batch_score(terms: BridgeTerms, x: np.ndarray) -> np.ndarray:
    """s = Ω_t⁻¹(μ - x) row-wise."""
    omega_inv = psd_inverse(terms.omega, "Omega_t")
    return np.einsum("nij,nj->ni", omega_inv, terms.mean - x)


def batch_flow(cache: KernelCache, terms: BridgeTerms, x: np.ndarray) -> np.ndarray:
    """u = A(x - m) + c(x) - D s(x) row-wise."""
    process = cache.process
    return (process.drift_field(x) + batch_control(cache, terms, x)
            - batch_score(terms, x) @ process.diffusivity.T)


def batch_sample(terms: BridgeTerms, rng: np.random.Generator) -> np.ndarray:
    """One draw per row from N(μ_t, Ω_t)."""
    L = psd_factor(terms.omega)
    n, d = terms.mean.shape
    return terms.mean + np.einsum("nij,nj->ni", L, rng.standard_normal((n, d)))


def _single(cache: KernelCache, pin: BridgePin, t: float, clamp: bool = True) -> BridgeTerms:
    _check_pin(cache, pin)
    ts = cache.check_times(t)
    if clamp:
        ts = cache.clamp(ts)
    return bridge_terms(cache, ts, pin.x0[None, :], pin.xT[None, :])


def _vector(y: np.ndarray, d: int, name: str) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != d:
        raise InvalidArgumentError(f"{name} must have length {d}")
    return y


def bridge_control(cache: KernelCache, pin: BridgePin, t: float, y: np.ndarray) -> np.ndarray:
    """
    Control term added to the reference drift by the endpoint pinning.

    Args:
        cache: Kernel cache
        pin: Bridge endpoints
        t: Time, clamped to [ε_t, T - ε_t]
        y: Current state

    Returns:
        -σσᵀ(Λ^σ_t)⁻¹(y - k_t) with k_t = e^{-(T-t)A}(xT - m) + m
    """
    terms = _single(cache, pin, t)
    return batch_control(cache, terms, _vector(y, cache.dim, "y")[None, :])[0]


def bridge_moments(cache: KernelCache, pin: BridgePin, t: float) -> BridgeMoments:
    """Mean and covariance of the bridge at (clamped) time t."""
    terms = _single(cache, pin, t)
    return BridgeMoments(terms.mean[0], terms.omega[0])


def bridge_two_time_cov(cache: KernelCache, pin: BridgePin, s: float, t: float) -> np.ndarray:
    """
    Cov(X_s, X_t) of the bridge for s ≤ t.

        Ω_{s,t} = Φ_s e^{(t-s)Aᵀ} - Φ_s e^{(T-s)Aᵀ} Φ_T⁻¹ e^{(T-t)A} Φ_t

    Raises:
        DomainError: If s > t or either time is outside [0, T]
    """
    _check_pin(cache, pin)
    cache.require_conditioning()
    if s > t:
        raise DomainError(f"two-time covariance needs s <= t, got s={s}, t={t}")
    ks = cache.terms(s)
    kt = cache.terms(t)
    phi_s, phi_t = ks.phi[0], kt.phi[0]
    cross = phi_s @ cache.exp(t - s).T
    return cross - phi_s @ ks.exp_rest[0].T @ cache.phi_T_inv @ kt.exp_rest[0] @ phi_t


def bridge_score(cache: KernelCache, pin: BridgePin, t: float, x: np.ndarray) -> np.ndarray:
    """∇_x log N(x; μ_{t|x0,xT}, Ω_t)."""
    terms = _single(cache, pin, t)
    return batch_score(terms, _vector(x, cache.dim, "x")[None, :])[0]


def bridge_flow(cache: KernelCache, pin: BridgePin, t: float, x: np.ndarray) -> np.ndarray:
    """Conditional probability-flow field A(x - m) + c(x) - D s(x)."""
    terms = _single(cache, pin, t)
    return batch_flow(cache, terms, _vector(x, cache.dim, "x")[None, :])[0]


def bridge_sample(
    cache: KernelCache,
    pin: BridgePin,
    t: float,
    seed: int | np.random.Generator | None = None,
    size: Optional[int] = None,
) -> np.ndarray:
    """
    Draw from the bridge law at time t.

    Args:
        cache: Kernel cache
        pin: Bridge endpoints
        t: Time (clamped)
        seed: Seed or generator
        size: Number of draws; None returns a single d-vector

    Returns:
        Array of shape (d,) or (size, d)
    """
    rng = np.random.default_rng(seed)
    terms = _single(cache, pin, t)
    L = psd_factor(terms.omega[0])
    n = 1 if size is None else int(size)
    draws = terms.mean[0] + rng.standard_normal((n, cache.dim)) @ L.T
    return draws[0] if size is None else draws


def bridge_targets(
    cache: KernelCache,
    t: np.ndarray,
    x0: np.ndarray,
    xT: np.ndarray,
    rng: np.random.Generator,
):
    """
    Sample z ~ p_{t|x0,xT} and return the flow and score regression targets.

    Times are clamped to [ε_t, T - ε_t].

    Returns:
        Tuple (z, u_target, s_target, omega) with row-wise arrays
    """
    ts = cache.clamp(cache.check_times(t))
    terms = bridge_terms(cache, ts, x0, xT)
    z = batch_sample(terms, rng)
    return z, batch_flow(cache, terms, z), batch_score(terms, z), terms.omega
