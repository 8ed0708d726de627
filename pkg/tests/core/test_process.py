import numpy as np
import pytest

from app.core import Gaussian, OUProcess
from app.errors import InvalidArgumentError, NotPSDError


class TestOUProcess:
    def test_json_round_trip(self, damped):
        data = damped.to_dict()
        assert set(data) == {"dim", "A", "m", "sigma"}
        assert OUProcess.from_dict(data) == damped

    def test_unknown_and_missing_keys(self, damped):
        data = damped.to_dict()
        with pytest.raises(InvalidArgumentError):
            OUProcess.from_dict({**data, "extra": 1})
        del data["sigma"]
        with pytest.raises(InvalidArgumentError):
            OUProcess.from_dict(data)

    def test_dim_mismatch(self, damped):
        with pytest.raises(InvalidArgumentError):
            OUProcess.from_dict({**damped.to_dict(), "dim": 3})

    def test_shape_validation(self):
        with pytest.raises(InvalidArgumentError):
            OUProcess(np.eye(3), np.zeros(2), np.eye(2))
        with pytest.raises(InvalidArgumentError):
            OUProcess(np.eye(2), np.zeros(2), np.array([[np.inf, 0.0], [0.0, 1.0]]))

    def test_arrays_are_read_only_copies(self):
        A = np.eye(2)
        process = OUProcess(A, np.zeros(2), np.eye(2))
        A[0, 0] = 5.0
        assert process.drift[0, 0] == 1.0
        with pytest.raises(ValueError):
            process.drift[0, 0] = 2.0

    def test_diffusivity(self, damped):
        sigma = damped.diffusion
        np.testing.assert_allclose(damped.diffusivity, 0.5 * sigma @ sigma.T)

    def test_drift_field(self, rotation):
        X = np.array([[1.0, -1.0], [2.0, 0.0]])
        np.testing.assert_allclose(rotation.drift_field(X), [[0.0, 0.0], [1.0, -2.5]])

    def test_from_affine(self):
        A = np.array([[-1.0, 0.5], [0.0, -2.0]])
        m = np.array([1.0, 2.0])
        process = OUProcess.from_affine(A, -A @ m, np.eye(2))
        np.testing.assert_allclose(process.target, m)

    def test_from_affine_singular_with_offset(self):
        with pytest.raises(InvalidArgumentError):
            OUProcess.from_affine(np.zeros((2, 2)), np.ones(2), np.eye(2))
        zero = OUProcess.from_affine(np.zeros((2, 2)), np.zeros(2), np.eye(2))
        np.testing.assert_array_equal(zero.target, np.zeros(2))


    def test_singular_drift_needs_zero_target(self):
        singular = np.array([[-1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(InvalidArgumentError, match="singular drift"):
            OUProcess(singular, np.array([0.0, 1.0]), np.eye(2))
        with pytest.raises(InvalidArgumentError, match="singular drift"):
            OUProcess.from_dict({"A": np.zeros((2, 2)).tolist(), "m": [1.0, 0.0], "sigma": np.eye(2).tolist()})
        assert OUProcess(singular, np.zeros(2), np.eye(2)).dim == 2

class TestGaussian:
    def test_symmetrized(self):
        g = Gaussian(np.zeros(2), np.array([[1.0, 0.2], [0.2 + 1e-12, 1.0]]))
        np.testing.assert_array_equal(g.cov, g.cov.T)

    def test_not_psd(self):
        with pytest.raises(NotPSDError):
            Gaussian(np.zeros(2), np.diag([1.0, -0.5]))

    def test_from_samples_unbiased(self, rng):
        X = rng.standard_normal((50, 3))
        g = Gaussian.from_samples(X, jitter=0.0)
        np.testing.assert_allclose(g.cov, np.cov(X, rowvar=False, ddof=1))
        with pytest.raises(InvalidArgumentError):
            Gaussian.from_samples(X[:1])

    def test_sampling_moments(self, rng):
        g = Gaussian(np.array([1.0, -2.0]), np.array([[2.0, 0.6], [0.6, 0.5]]))
        X = g.sample(200_000, rng)
        np.testing.assert_allclose(X.mean(axis=0), g.mean, atol=0.02)
        np.testing.assert_allclose(np.cov(X, rowvar=False), g.cov, atol=0.03)

    def test_dict_round_trip(self):
        g = Gaussian(np.array([0.5, 0.25]), np.array([[1.0, 0.1], [0.1, 2.0]]))
        back = Gaussian.from_dict(g.to_dict())
        np.testing.assert_array_equal(back.mean, g.mean)
        np.testing.assert_array_equal(back.cov, g.cov)
        with pytest.raises(InvalidArgumentError):
            Gaussian.from_dict({"mean": [0.0]})
