"""
Reference-process core: matrix functions, process containers and kernel cache.
"""

from .linalg import expm, sqrtm_psd, inv_sqrtm_pd, psd_inverse, psd_factor, symmetrize, random_orthogonal
from .process import OUProcess, Gaussian
from .kernels import KernelCache, KernelTerms, phi, lam, lam_sigma, unconditional_moments

__all__ = [
    'expm',
    'sqrtm_psd',
    'inv_sqrtm_pd',
    'psd_inverse',
    'psd_factor',
    'symmetrize',
    'random_orthogonal',
    'OUProcess',
    'Gaussian',
    'KernelCache',
    'KernelTerms',
    'phi',
    'lam',
    'lam_sigma',
    'unconditional_moments',
]
