"""
Dense matrix helpers: exponential, symmetric roots and clamped inverses.

All routines accept a single matrix or a stack ``(..., d, d)``.
"""

import numpy as np
import scipy.linalg

from ..errors import DegenerateKernelError, InvalidArgumentError, NotPSDError

# eigenvalue floor relative to the largest eigenvalue
EIG_CLAMP = 1e-12


def symmetrize(M: np.ndarray) -> np.ndarray:
    """Return ½(M + Mᵀ) over the last two axes."""
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def check_finite(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """
    Convert to a float array and reject NaN/inf entries.

    Raises:
        InvalidArgumentError: If any entry is not finite
    """
    arr = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} has non-finite entries")
    return arr


def check_square(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    arr = check_finite(M, name)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2]:
        raise InvalidArgumentError(f"{name} must be square, got shape {arr.shape}")
    return arr


def expm(M: np.ndarray) -> np.ndarray:
    """
    Matrix exponential by scaling-and-squaring with a degree-13 Padé approximant.

    Args:
        M: Square matrix or stack of square matrices

    Returns:
        e^M with the same shape

    Raises:
        InvalidArgumentError: If M is not finite or not square
    """
    return scipy.linalg.expm(check_square(M, "expm argument"))


def _eigh_sym(M: np.ndarray, name: str):
    arr = check_square(M, name)
    asym = np.max(np.abs(arr - np.swapaxes(arr, -1, -2))) if arr.size else 0.0
    if asym > 1e-8 * max(1.0, float(np.max(np.abs(arr)))):
        raise InvalidArgumentError(f"{name} is not symmetric (max asymmetry {asym:.3e})")
    return np.linalg.eigh(symmetrize(arr))


def sqrtm_psd(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """
    Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-1e-8·‖M‖, 0) are clamped to zero.

    Args:
        M: Symmetric PSD matrix (or stack)
        name: Used in error messages

    Returns:
        Symmetric R with R·R = M

    Raises:
        NotPSDError: If an eigenvalue is below -1e-8·‖M‖
    """
    w, V = _eigh_sym(M, name)
    scale = np.max(np.abs(w), axis=-1, keepdims=True)
    if np.any(w < -1e-8 * scale):
        raise NotPSDError(f"{name} is not positive semidefinite (min eigenvalue {w.min():.3e})")
    root = np.sqrt(np.clip(w, 0.0, None))
    return symmetrize((V * root[..., None, :]) @ np.swapaxes(V, -1, -2))


def inv_sqrtm_pd(M: np.ndarray, name: str = "matrix", min_eig: float = 0.0) -> np.ndarray:
    """
    Inverse symmetric square root of a positive definite matrix.

    Raises:
        NotPSDError: If the smallest eigenvalue is not above ``min_eig`` relative to the largest
    """
    w, V = _eigh_sym(M, name)
    scale = np.max(np.abs(w), axis=-1, keepdims=True)
    if np.any(w <= min_eig * scale) or np.any(scale <= 0):
        raise NotPSDError(f"{name} is not positive definite (min eigenvalue {w.min():.3e})")
    return symmetrize((V / np.sqrt(w)[..., None, :]) @ np.swapaxes(V, -1, -2))


def _clamped_eigh(M: np.ndarray, name: str):
    w, V = np.linalg.eigh(symmetrize(np.asarray(M, dtype=float)))
    lmax = np.max(w, axis=-1, keepdims=True)
    if not np.all(np.isfinite(w)) or np.any(lmax <= 0):
        raise DegenerateKernelError(f"{name} is numerically zero or not finite")
    return np.maximum(w, EIG_CLAMP * lmax), V


def psd_inverse(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """
    Inverse of a symmetric PSD matrix with eigenvalues clamped at 1e-12·λ_max.

    Raises:
        DegenerateKernelError: If the matrix is numerically zero
    """
    w, V = _clamped_eigh(M, name)
    return symmetrize((V / w[..., None, :]) @ np.swapaxes(V, -1, -2))


def psd_factor(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    """
    Factor L with L·Lᵀ ≈ M for sampling, using the clamped eigendecomposition.

    A zero matrix yields a zero factor.
    """
    arr = symmetrize(np.asarray(M, dtype=float))
    w, V = np.linalg.eigh(arr)
    lmax = np.max(w, axis=-1, keepdims=True)
    floor = np.where(lmax > 0, EIG_CLAMP * lmax, 0.0)
    w = np.maximum(w, floor)
    return V * np.sqrt(w)[..., None, :]


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """
    Random orthogonal matrix from the QR factorization of a standard normal matrix.

    The signs of R's diagonal are folded into Q so the result is unique per draw.
    """
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs[None, :]
