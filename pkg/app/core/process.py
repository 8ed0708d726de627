"""
Reference process and Gaussian law containers.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from ..errors import InvalidArgumentError, NotPSDError
from .linalg import check_finite, psd_factor, symmetrize


@dataclass(frozen=True)
class OUProcess:
    """
    Multivariate Ornstein-Uhlenbeck reference dX = A(X - m)dt + σ dB.

    A singular A is accepted only with m = 0.

    Attributes:
        drift: d×d drift matrix A
        target: length-d mean-reversion target m
        diffusion: d×d diffusion matrix σ
    """

    drift: np.ndarray
    target: np.ndarray
    diffusion: np.ndarray

    def __post_init__(self):
        A = check_finite(self.drift, "drift A").copy()
        m = check_finite(self.target, "target m").reshape(-1).copy()
        sigma = check_finite(self.diffusion, "diffusion sigma").copy()
        d = m.shape[0]
        if d < 1:
            raise InvalidArgumentError("process dimension must be positive")
        if A.shape != (d, d):
            raise InvalidArgumentError(f"drift A must be {d}x{d}, got {A.shape}")
        if sigma.shape != (d, d):
            raise InvalidArgumentError(f"diffusion sigma must be {d}x{d}, got {sigma.shape}")
        if np.any(m) and np.linalg.matrix_rank(A) < d:
            raise InvalidArgumentError("singular drift A with nonzero target m: use m = 0 or an invertible A")
        for arr in (A, m, sigma):
            arr.setflags(write=False)
        object.__setattr__(self, "drift", A)
        object.__setattr__(self, "target", m)
        object.__setattr__(self, "diffusion", sigma)

    @property
    def dim(self) -> int:
        return self.target.shape[0]

    @property
    def sigma_sq(self) -> np.ndarray:
        """σσᵀ."""
        return symmetrize(self.diffusion @ self.diffusion.T)

    @property
    def diffusivity(self) -> np.ndarray:
        """D = ½σσᵀ."""
        return 0.5 * self.sigma_sq

    def drift_field(self, X: np.ndarray) -> np.ndarray:
        """Evaluate A(x - m) row-wise for X of shape (n, d)."""
        return (np.asarray(X, dtype=float) - self.target) @ self.drift.T

    @classmethod
    def brownian(cls, dim: int, scale: float = 1.0) -> "OUProcess":
        """Brownian reference: A = 0, m = 0, σ = scale·I."""
        return cls(np.zeros((dim, dim)), np.zeros(dim), scale * np.eye(dim))

    @classmethod
    def from_affine(cls, drift: np.ndarray, offset: np.ndarray, diffusion: np.ndarray) -> "OUProcess":
        """
        Build from the affine form dX = (AX + b)dt + σ dB using m = -A⁻¹b.

        Raises:
            InvalidArgumentError: If A is singular while b is nonzero
        """
        A = check_finite(drift, "drift A")
        b = check_finite(offset, "offset b").reshape(-1)
        if not np.any(b):
            return cls(A, np.zeros_like(b), diffusion)
        if np.linalg.cond(A) > 1e12:
            raise InvalidArgumentError("singular drift A with nonzero offset has no mean-reversion target")
        return cls(A, -np.linalg.solve(A, b), diffusion)

    def to_dict(self) -> Dict[str, Any]:
        """JSON form {"dim", "A", "m", "sigma"}."""
        return {
            "dim": self.dim,
            "A": self.drift.tolist(),
            "m": self.target.tolist(),
            "sigma": self.diffusion.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OUProcess":
        """
        Parse the JSON form.

        Raises:
            InvalidArgumentError: On missing/unknown keys or inconsistent dimensions
        """
        if not isinstance(data, dict):
            raise InvalidArgumentError("process must be a JSON object")
        keys = set(data)
        missing = {"A", "m", "sigma"} - keys
        unknown = keys - {"dim", "A", "m", "sigma"}
        if missing:
            raise InvalidArgumentError(f"process is missing keys: {sorted(missing)}")
        if unknown:
            raise InvalidArgumentError(f"process has unknown keys: {sorted(unknown)}")
        process = cls(np.array(data["A"], dtype=float), np.array(data["m"], dtype=float),
                      np.array(data["sigma"], dtype=float))
        if "dim" in data and int(data["dim"]) != process.dim:
            raise InvalidArgumentError(f"process dim {data['dim']} does not match arrays ({process.dim})")
        return process

    def __eq__(self, other) -> bool:
        if not isinstance(other, OUProcess):
            return NotImplemented
        return (np.array_equal(self.drift, other.drift) and np.array_equal(self.target, other.target)
                and np.array_equal(self.diffusion, other.diffusion))

    __hash__ = None


@dataclass(frozen=True)
class Gaussian:
    """Mean and symmetric PSD covariance."""

    mean: np.ndarray
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        mean = check_finite(self.mean, "mean").reshape(-1)
        cov = symmetrize(check_finite(self.cov, "covariance"))
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise InvalidArgumentError(f"covariance shape {cov.shape} does not match mean length {mean.shape[0]}")
        w = np.linalg.eigvalsh(cov)
        if w.size and w.min() < -1e-10 * max(1.0, float(np.abs(w).max())):
            raise NotPSDError(f"covariance has negative eigenvalue {w.min():.3e}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.cov).min())

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n samples as an (n, d) array."""
        L = psd_factor(self.cov)
        return self.mean + rng.standard_normal((n, self.dim)) @ L.T

    def with_jitter(self, lam: float) -> "Gaussian":
        """Same law with λI added to the covariance."""
        return Gaussian(self.mean, self.cov + lam * np.eye(self.dim))

    @classmethod
    def from_samples(cls, X: np.ndarray, jitter: float = 1e-8) -> "Gaussian":
        """
        Empirical fit: sample mean and unbiased covariance plus jitter·I.

        Raises:
            InvalidArgumentError: If fewer than 2 samples are given
        """
        X = check_finite(X, "samples")
        if X.ndim != 2 or X.shape[0] < 2:
            raise InvalidArgumentError("need an (n, d) sample array with n >= 2")
        cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
        return cls(X.mean(axis=0), cov + jitter * np.eye(X.shape[1]))

    def to_dict(self) -> Dict[str, Any]:
        return {"mean": self.mean.tolist(), "cov": self.cov.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], name: Optional[str] = None) -> "Gaussian":
        label = name or "gaussian"
        if not isinstance(data, dict) or set(data) != {"mean", "cov"}:
            raise InvalidArgumentError(f"{label} must be an object with exactly 'mean' and 'cov'")
        return cls(np.array(data["mean"], dtype=float), np.array(data["cov"], dtype=float))
