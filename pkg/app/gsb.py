"""
Closed-form Gaussian Schrödinger bridge with an OU reference.

The marginals are mapped to coordinates where the reference transition is
standard (x ↦ Σ_T^{-1/2}(e^{TA}(x - m) + m) at time 0, x ↦ Σ_T^{-1/2} x at
time T). There the static problem is Gaussian entropic OT with unit
regularization, whose cross-covariance C̄ is explicit. The bridge is then the
Gaussian process

    ν_t  = 𝔄_t ā + 𝔅_t b̄ + 𝔠_t
    Ξ_st = Ω_st + 𝔄_s Ā 𝔄_tᵀ + 𝔄_s C̄ 𝔅_tᵀ + 𝔅_s C̄ᵀ 𝔄_tᵀ + 𝔅_s B̄ 𝔅_tᵀ

with 𝔄_t = (e^{-(T-t)A} - Γ_t)Σ_T^{1/2}, 𝔅_t = Γ_t Σ_T^{1/2},
𝔠_t = (I - e^{-(T-t)A})m, and it is generated by the linear drift
ν̇_t + S_tᵀ Ξ_t⁻¹ (x - ν_t).
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np

from .bridge import BridgePin, bridge_two_time_cov
from .core.kernels import KernelCache
from .core.linalg import inv_sqrtm_pd, psd_factor, psd_inverse, sqrtm_psd, symmetrize
from .core.process import Gaussian, OUProcess
from .errors import DegenerateMarginalError, DomainError, InvalidArgumentError, NotPSDError

logger = logging.getLogger(__name__)

MIN_MARGINAL_EIG = 1e-10
FD_STEP = 1e-5


class Coefficients(NamedTuple):
    """Time-dependent coefficient matrices at one time."""

    gain: np.ndarray   # Γ_t
    a_coef: np.ndarray  # 𝔄_t
    b_coef: np.ndarray  # 𝔅_t
    c_coef: np.ndarray  # 𝔠_t


class CoefficientRates(NamedTuple):
    """Time derivatives of the coefficients and the Ω cross-derivative."""

    gain: np.ndarray   # Γ̇_t
    a_coef: np.ndarray  # 𝔄̇_t
    b_coef: np.ndarray  # 𝔅̇_t
    c_coef: np.ndarray  # 𝔠̇_t
    omega: np.ndarray  # (∂_{t'} Ω_{t,t'})(t)


@dataclass(frozen=True)
class GSBProblem:
    """
    Gaussian marginals at 0 and T plus the reference they are bridged under.

    Raises:
        InvalidArgumentError: On dimension mismatch
        DegenerateMarginalError: If either covariance has min eigenvalue ≤ 1e-10
    """

    process: OUProcess
    cache: KernelCache
    rho0: Gaussian
    rhoT: Gaussian

    def __post_init__(self):
        d = self.process.dim
        if self.cache.process is not self.process and self.cache.process != self.process:
            raise InvalidArgumentError("cache was built for a different process")
        for name, g in (("rho0", self.rho0), ("rhoT", self.rhoT)):
            if g.dim != d:
                raise InvalidArgumentError(f"{name} has dimension {g.dim}, expected {d}")
            if g.min_eigenvalue() <= MIN_MARGINAL_EIG:
                raise DegenerateMarginalError(
                    f"{name} covariance is near singular (min eigenvalue {g.min_eigenvalue():.3e}); "
                    "add jitter explicitly if intended"
                )

    @property
    def horizon(self) -> float:
        return self.cache.horizon


def transform_marginals(problem: GSBProblem) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Map (a, 𝒜), (b, 𝓑) to the coordinates where the reference transition is standard.

    Returns:
        (ā, Ā, b̄, B̄)

    Raises:
        DegenerateDiffusionError: If Σ_T is not positive definite
    """
    cache = problem.cache
    cache.require_conditioning()
    m = problem.process.target
    E_T = cache.expA[-1]
    Ri = cache.sigmaT_invroot
    a_bar = Ri @ (E_T @ (problem.rho0.mean - m) + m)
    A_bar = symmetrize(Ri @ E_T @ problem.rho0.cov @ E_T.T @ Ri)
    b_bar = Ri @ problem.rhoT.mean
    B_bar = symmetrize(Ri @ problem.rhoT.cov @ Ri)
    return a_bar, A_bar, b_bar, B_bar


def _inner_root(A_cov: np.ndarray, B_cov: np.ndarray, sigma2: float):
    root = sqrtm_psd(A_cov, "source covariance")
    inner = symmetrize(root @ B_cov @ root) + 0.25 * sigma2 ** 2 * np.eye(A_cov.shape[0])
    return root, sqrtm_psd(inner, "inner covariance")


def entropic_cross_cov(A_bar: np.ndarray, B_bar: np.ndarray, sigma2: float = 1.0) -> np.ndarray:
    """
    Cross-covariance of the Gaussian entropic OT plan.

        C = A^{1/2} (A^{1/2} B A^{1/2} + σ⁴/4 I)^{1/2} A^{-1/2} - σ²/2 I

    Raises:
        NotPSDError: If A is singular
    """
    root, inner = _inner_root(A_bar, B_bar, sigma2)
    inv_root = inv_sqrtm_pd(A_bar, "source covariance", min_eig=1e-14)
    return root @ inner @ inv_root - 0.5 * sigma2 * np.eye(A_bar.shape[0])


def eot_gaussian_value(alpha: Gaussian, beta: Gaussian, sigma2: float) -> float:
    """
    Entropic OT value between two Gaussians.

        ½‖a - b‖² + ½[tr A + tr B - 2 tr C + σ² log det(C/σ² + I)]

    tr C and the determinant are evaluated through the similarity
    C + σ²/2 I ~ (A^{1/2} B A^{1/2} + σ⁴/4 I)^{1/2}, so singular covariances are allowed.
    With σ² = 0 the log-det term is dropped.
    """
    if sigma2 < 0:
        raise InvalidArgumentError("sigma2 must be nonnegative")
    d = alpha.dim
    _, inner = _inner_root(alpha.cov, beta.cov, sigma2)
    trace_c = np.trace(inner) - 0.5 * d * sigma2
    bures = np.trace(alpha.cov) + np.trace(beta.cov) - 2.0 * trace_c
    if sigma2 > 0:
        _, logdet = np.linalg.slogdet(inner / sigma2 + 0.5 * np.eye(d))
        bures += sigma2 * logdet
    return float(0.5 * np.sum((alpha.mean - beta.mean) ** 2) + 0.5 * bures)


class GSBSolution:
    """
    Solved Gaussian Schrödinger bridge; all evaluations are pure.

    Args:
        problem: The GSB problem
    """

    def __init__(self, problem: GSBProblem):
        self.problem = problem
        self.process = problem.process
        self.cache = problem.cache
        self.a_bar, self.A_bar, self.b_bar, self.B_bar = transform_marginals(problem)
        self.C_bar = entropic_cross_cov(self.A_bar, self.B_bar)
        logger.debug("GSB solved: d=%d T=%g", self.process.dim, self.cache.horizon)

    @property
    def transformed(self):
        return self.a_bar, self.A_bar, self.b_bar, self.B_bar

    @property
    def horizon(self) -> float:
        return self.cache.horizon

    # ------------------------------------------------------------------

    def coefficients(self, t: float) -> Coefficients:
        kt = self.cache.terms(t)
        R = self.cache.sigmaT_root
        gain = kt.phi[0] @ kt.exp_rest[0].T @ self.cache.phi_T_inv
        neg_rest = kt.exp_neg_rest[0]
        d = self.process.dim
        return Coefficients(
            gain=gain,
            a_coef=(neg_rest - gain) @ R,
            b_coef=gain @ R,
            c_coef=(np.eye(d) - neg_rest) @ self.process.target,
        )

    def rates(self, t: float) -> CoefficientRates:
        """Closed-form derivatives of the coefficients at t."""
        kt = self.cache.terms(t)
        A = self.process.drift
        Q = self.process.sigma_sq
        R = self.cache.sigmaT_root
        P_inv = self.cache.phi_T_inv
        phi_t = kt.phi[0]
        exp_t = kt.exp_t[0]
        rest = kt.exp_rest[0]
        neg_rest = kt.exp_neg_rest[0]
        phi_dot = exp_t @ Q @ exp_t.T

        gain_dot = (exp_t @ Q @ self.cache.expA[-1].T - phi_t @ A.T @ rest.T) @ P_inv
        omega_dot = phi_t @ (A.T - rest.T @ P_inv @ rest @ (-A @ phi_t + phi_dot))
        return CoefficientRates(
            gain=gain_dot,
            a_coef=(A @ neg_rest - gain_dot) @ R,
            b_coef=gain_dot @ R,
            c_coef=-A @ neg_rest @ self.process.target,
            omega=omega_dot,
        )

    def rates_fd(self, t: float, h: float = FD_STEP) -> CoefficientRates:
        """Finite-difference version of :meth:`rates` for cross-checks."""
        lo, hi = max(t - h, 0.0), min(t + h, self.horizon)
        c_lo, c_hi = self.coefficients(lo), self.coefficients(hi)
        span = hi - lo
        pin = _dummy_pin(self)
        # Ω_{t,t'} has a kink at t' = t; the drift uses the right derivative
        s = min(h, 0.5 * (self.horizon - t))
        if s <= 0:
            raise DomainError("finite-difference rates need t < T")
        omega = (-3.0 * bridge_two_time_cov(self.cache, pin, t, t)
                 + 4.0 * bridge_two_time_cov(self.cache, pin, t, t + s)
                 - bridge_two_time_cov(self.cache, pin, t, t + 2 * s)) / (2.0 * s)
        return CoefficientRates(
            gain=(c_hi.gain - c_lo.gain) / span,
            a_coef=(c_hi.a_coef - c_lo.a_coef) / span,
            b_coef=(c_hi.b_coef - c_lo.b_coef) / span,
            c_coef=(c_hi.c_coef - c_lo.c_coef) / span,
            omega=omega,
        )

    # ------------------------------------------------------------------

    def mean(self, t: float) -> np.ndarray:
        c = self.coefficients(t)
        return c.a_coef @ self.a_bar + c.b_coef @ self.b_bar + c.c_coef

    def mean_rate(self, t: float) -> np.ndarray:
        r = self.rates(t)
        return r.a_coef @ self.a_bar + r.b_coef @ self.b_bar + r.c_coef

    def cov(self, s: float, t: float) -> np.ndarray:
        if s > t:
            raise DomainError(f"gsb covariance needs s <= t, got s={s}, t={t}")
        cs, ct = self.coefficients(s), self.coefficients(t)
        omega = bridge_two_time_cov(self.cache, _dummy_pin(self), s, t)
        out = (omega
               + cs.a_coef @ self.A_bar @ ct.a_coef.T
               + cs.a_coef @ self.C_bar @ ct.b_coef.T
               + cs.b_coef @ self.C_bar.T @ ct.a_coef.T
               + cs.b_coef @ self.B_bar @ ct.b_coef.T)
        return symmetrize(out) if s == t else out

    def drift_matrix(self, t: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Linear drift data at a (clamped) time.

        Returns:
            (K_t, ν_t, ν̇_t) with K_t = S_tᵀ Ξ_t⁻¹ so that drift(x) = ν̇_t + K_t (x - ν_t)
        """
        t = float(self.cache.clamp(self.cache.check_times(t))[0])
        c = self.coefficients(t)
        r = self.rates(t)
        S = (r.omega
             + c.a_coef @ self.A_bar @ r.a_coef.T
             + c.a_coef @ self.C_bar @ r.b_coef.T
             + c.b_coef @ self.C_bar.T @ r.a_coef.T
             + c.b_coef @ self.B_bar @ r.b_coef.T)
        xi_inv = psd_inverse(self.cov(t, t), "Xi_t")
        nu = c.a_coef @ self.a_bar + c.b_coef @ self.b_bar + c.c_coef
        nu_dot = r.a_coef @ self.a_bar + r.b_coef @ self.b_bar + r.c_coef
        return S.T @ xi_inv, nu, nu_dot

    def drift(self, t: float, x: np.ndarray) -> np.ndarray:
        """Drift of the generating SDE; x may be (d,) or (n, d)."""
        K, nu, nu_dot = self.drift_matrix(t)
        x = np.asarray(x, dtype=float)
        return nu_dot + (x - nu) @ K.T

    def marginal(self, t: float) -> Gaussian:
        return Gaussian(self.mean(t), self.cov(t, t))

    def sample_plan(self, n: int, seed: int | np.random.Generator | None = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Draw endpoint pairs from the closed-form static plan.

        Returns:
            (X0, XT) arrays of shape (n, d) in original coordinates
        """
        rng = np.random.default_rng(seed)
        d = self.process.dim
        joint = np.block([[self.A_bar, self.C_bar], [self.C_bar.T, self.B_bar]])
        L = psd_factor(joint)
        Z = np.concatenate([self.a_bar, self.b_bar]) + rng.standard_normal((n, 2 * d)) @ L.T
        R = self.cache.sigmaT_root
        m = self.process.target
        Y0 = Z[:, :d] @ R.T
        XT = Z[:, d:] @ R.T
        E_negT = self.cache.exp_negA[-1]
        X0 = (Y0 - m) @ E_negT.T + m
        return X0, XT


def _dummy_pin(sol: GSBSolution) -> BridgePin:
    d = sol.process.dim
    return BridgePin(np.zeros(d), np.zeros(d), sol.horizon)


def solve(problem: GSBProblem) -> GSBSolution:
    """Solve the Gaussian Schrödinger bridge problem."""
    return GSBSolution(problem)


def gsb_mean(sol: GSBSolution, t: float) -> np.ndarray:
    """ν_t."""
    return sol.mean(t)


def gsb_cov(sol: GSBSolution, s: float, t: float) -> np.ndarray:
    """Ξ_st for s ≤ t."""
    return sol.cov(s, t)


def gsb_drift(sol: GSBSolution, t: float, x: np.ndarray) -> np.ndarray:
    """ν̇_t + S_tᵀ Ξ_t⁻¹ (x - ν_t)."""
    return sol.drift(t, x)


def gsb_marginal_interpolate(sol: GSBSolution, times: Sequence[float]) -> List[Gaussian]:
    """Marginal laws (ν_t, Ξ_tt) on a grid of times."""
    return [sol.marginal(float(t)) for t in times]
