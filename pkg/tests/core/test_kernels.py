import numpy as np
import pytest
from scipy.integrate import quad_vec

from app.core import KernelCache, OUProcess, expm, lam, lam_sigma, phi, unconditional_moments
from app.errors import DegenerateDiffusionError, DomainError, InvalidArgumentError


def _phi_oracle(process, t):
    A, Q = process.drift, process.sigma_sq
    value, _ = quad_vec(lambda u: expm(u * A) @ Q @ expm(u * A).T, 0.0, t, epsabs=1e-13, epsrel=1e-12)
    return value


def _lam_oracle(process, T, t):
    A = process.drift
    value, _ = quad_vec(lambda s: expm(-s * A) @ expm(-s * A).T, 0.0, T - t, epsabs=1e-13, epsrel=1e-12)
    return value


class TestPhi:
    def test_brownian_is_linear_in_time(self, brownian_cache):
        np.testing.assert_allclose(phi(brownian_cache, 1.0), np.eye(2), atol=1e-13)
        np.testing.assert_allclose(phi(brownian_cache, 0.37), 0.37 * np.eye(2), atol=1e-13)

    def test_scalar_ou_closed_form(self):
        process = OUProcess(-np.eye(2), np.zeros(2), np.eye(2))
        cache = KernelCache(process, 1.0)
        np.testing.assert_allclose(phi(cache, 1.0), (1 - np.exp(-2.0)) / 2 * np.eye(2), atol=1e-10)

    @pytest.mark.parametrize("t", [0.7, 0.123456, 1.0])
    def test_matches_quadrature(self, rotation, t):
        cache = KernelCache(rotation, 1.0)
        np.testing.assert_allclose(phi(cache, t), _phi_oracle(rotation, t), atol=1e-8)

    def test_non_isotropic_diffusion(self, damped, damped_cache):
        np.testing.assert_allclose(phi(damped_cache, 0.55), _phi_oracle(damped, 0.55), atol=1e-8)

    def test_zero_at_origin_and_monotone(self, rotation_cache):
        np.testing.assert_array_equal(rotation_cache.phi[0], np.zeros((2, 2)))
        increments = np.diff(rotation_cache.phi, axis=0)
        assert np.linalg.eigvalsh(increments).min() > -1e-9

    def test_composition_law(self, rotation_cache):
        grid = rotation_cache.grid
        s, t = grid[40], grid[200]
        E = rotation_cache.exp(t - s)
        lhs = phi(rotation_cache, t)
        rhs = phi(rotation_cache, t - s) + E @ phi(rotation_cache, s) @ E.T
        np.testing.assert_allclose(lhs, rhs, atol=1e-8)

    def test_lyapunov_residual(self, rotation, rotation_cache):
        h = rotation_cache.step
        P = rotation_cache.phi
        A, Q = rotation.drift, rotation.sigma_sq
        for k in (10, 100, 200):
            deriv = (P[k + 1] - P[k - 1]) / (2 * h)
            residual = deriv - (A @ P[k] + P[k] @ A.T + Q)
            assert np.abs(residual).max() < 50 * h ** 2

    def test_out_of_range_time(self, rotation_cache):
        with pytest.raises(DomainError):
            phi(rotation_cache, 1.5)
        with pytest.raises(DomainError):
            phi(rotation_cache, -0.1)


class TestLambda:
    def test_brownian(self, brownian_cache):
        np.testing.assert_allclose(lam(brownian_cache, 0.0), np.eye(2), atol=1e-13)
        np.testing.assert_allclose(lam(brownian_cache, 0.5), 0.5 * np.eye(2), atol=1e-13)

    def test_zero_at_horizon(self, rotation_cache):
        np.testing.assert_array_equal(lam(rotation_cache, 1.0), np.zeros((2, 2)))

    @pytest.mark.parametrize("t", [0.0, 0.31, 0.9999])
    def test_matches_quadrature(self, damped, t):
        cache = KernelCache(damped, 1.0)
        np.testing.assert_allclose(lam(cache, t), _lam_oracle(damped, 1.0, t), atol=1e-8)

    def test_psd_before_horizon(self, rotation_cache):
        assert np.linalg.eigvalsh(rotation_cache.lam[:-1]).min() > 0


class TestDiffusionWeightedLambda:
    def test_equals_lambda_for_unit_diffusion(self, rotation_cache):
        for t in (0.0, 0.3, 0.77777):
            np.testing.assert_allclose(lam_sigma(rotation_cache, t), lam(rotation_cache, t), atol=1e-9)

    def test_scales_with_isotropic_diffusion(self, rotation):
        scaled = KernelCache(OUProcess(rotation.drift, rotation.target, 0.5 * np.eye(2)), 1.0, nodes=257)
        unit = KernelCache(rotation, 1.0, nodes=257)
        np.testing.assert_allclose(lam_sigma(scaled, 0.4), 0.25 * lam(unit, 0.4), atol=1e-9)

    @pytest.mark.parametrize("t", [0.0, 0.31, 0.9])
    def test_matches_quadrature(self, damped, damped_cache, t):
        A, Q = damped.drift, damped.sigma_sq
        expected, _ = quad_vec(lambda s: expm(-s * A) @ Q @ expm(-s * A).T, 0.0, 1.0 - t, epsabs=1e-13, epsrel=1e-12)
        np.testing.assert_allclose(lam_sigma(damped_cache, t), expected, atol=1e-8)

    def test_zero_at_horizon(self, damped_cache):
        np.testing.assert_allclose(lam_sigma(damped_cache, 1.0), np.zeros((2, 2)), atol=1e-15)


class TestCache:
    def test_root_of_phi_T(self, rotation_cache):
        R = rotation_cache.sigmaT_root
        err = np.linalg.norm(R @ R - rotation_cache.phi_T) / np.linalg.norm(rotation_cache.phi_T)
        assert err < 1e-8
        np.testing.assert_allclose(rotation_cache.sigmaT_invroot @ R, np.eye(2), atol=1e-10)

    def test_deterministic(self, rotation):
        a = KernelCache(rotation, 2.0, nodes=65)
        b = KernelCache(rotation, 2.0, nodes=65)
        np.testing.assert_array_equal(a.phi, b.phi)
        np.testing.assert_array_equal(a.lam, b.lam)

    def test_read_only(self, rotation_cache):
        with pytest.raises(ValueError):
            rotation_cache.phi[1, 0, 0] = 1.0

    def test_degenerate_diffusion(self):
        process = OUProcess(np.zeros((2, 2)), np.zeros(2), np.diag([1.0, 0.0]))
        cache = KernelCache(process, 1.0, nodes=17)
        assert cache.phi_T_inv is None
        with pytest.raises(DegenerateDiffusionError):
            cache.require_conditioning()

    def test_invalid_arguments(self, rotation):
        with pytest.raises(InvalidArgumentError):
            KernelCache(rotation, 0.0)
        with pytest.raises(InvalidArgumentError):
            KernelCache(rotation, 1.0, nodes=2)
        with pytest.raises(InvalidArgumentError):
            KernelCache(rotation, 1.0, substeps=3)


class TestUnconditionalMoments:
    def test_at_origin(self, rotation, rotation_cache):
        law = unconditional_moments(rotation, rotation_cache, np.array([0.4, -2.0]), 0.0)
        np.testing.assert_allclose(law.mean, [0.4, -2.0])
        np.testing.assert_allclose(law.cov, np.zeros((2, 2)), atol=1e-15)

    def test_brownian(self, brownian, brownian_cache):
        law = unconditional_moments(brownian, brownian_cache, np.array([1.0, 2.0]), 0.6)
        np.testing.assert_allclose(law.mean, [1.0, 2.0])
        np.testing.assert_allclose(law.cov, 0.6 * np.eye(2), atol=1e-13)

    def test_mean_reversion_half_life(self):
        m = np.ones(3)
        process = OUProcess(-np.eye(3), m, np.eye(3))
        cache = KernelCache(process, 1.0)
        law = unconditional_moments(process, cache, np.zeros(3), np.log(2.0))
        np.testing.assert_allclose(law.mean, 0.5 * m, rtol=1e-6)
