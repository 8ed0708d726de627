import numpy as np
import pytest

from app.core import Gaussian
from app.errors import InvalidArgumentError
from app.metrics import MetricReport, bw2, emd, energy_distance, fit_gaussian, force_error


class TestBuresWasserstein:
    def test_identical_is_zero(self):
        g = Gaussian(np.array([1.0, 2.0]), np.array([[2.0, 0.3], [0.3, 1.0]]))
        assert bw2(g, g) == pytest.approx(0.0, abs=1e-10)

    def test_commuting_covariances(self):
        g1 = Gaussian(np.array([0.0, 0.0]), np.diag([4.0, 1.0]))
        g2 = Gaussian(np.array([1.0, -1.0]), np.diag([1.0, 9.0]))
        assert bw2(g1, g2) == pytest.approx(2.0 + 1.0 + 4.0)

    def test_symmetric(self, rng):
        M1, M2 = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
        g1 = Gaussian(rng.standard_normal(3), M1 @ M1.T + 0.1 * np.eye(3))
        g2 = Gaussian(rng.standard_normal(3), M2 @ M2.T + 0.1 * np.eye(3))
        assert bw2(g1, g2) == pytest.approx(bw2(g2, g1), rel=1e-8)
        assert bw2(g1, g2) > 0

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            bw2(Gaussian(np.zeros(1), np.eye(1)), Gaussian(np.zeros(2), np.eye(2)))

    def test_fit_gaussian_adds_jitter(self):
        X = np.array([[0.0, 0.0], [2.0, 0.0]])
        g = fit_gaussian(X, jitter=1e-3)
        np.testing.assert_allclose(g.mean, [1.0, 0.0])
        np.testing.assert_allclose(g.cov, [[2.001, 0.0], [0.0, 0.001]])


class TestSampleDistances:
    def test_energy_distance_points(self):
        assert energy_distance(np.array([[0.0]]), np.array([[1.0]])) == pytest.approx(2.0)
        X = np.array([[0.0, 1.0], [2.0, -1.0]])
        assert energy_distance(X, X) == pytest.approx(0.0, abs=1e-12)

    def test_energy_distance_grows_with_shift(self, rng):
        X = rng.standard_normal((200, 2))
        near = energy_distance(X, X + 0.1)
        far = energy_distance(X, X + 1.0)
        assert 0 < near < far

    def test_emd_of_shift(self, rng):
        X = rng.standard_normal((50, 2))
        shift = np.array([0.3, 0.4])
        report = emd(X, X + shift)
        assert isinstance(report, MetricReport)
        assert report.value == pytest.approx(0.5, rel=1e-6)
        assert report.sizes == (50, 50)
        assert not report.approximate
        assert emd(X, X + shift, metric="sqeuclidean").value == pytest.approx(0.25, rel=1e-6)

    def test_emd_unequal_sizes(self):
        X = np.array([[0.0], [2.0]])
        Y = np.array([[1.0]])
        assert emd(X, Y).value == pytest.approx(1.0)

    def test_emd_entropic_fallback(self, monkeypatch):
        monkeypatch.setattr("app.metrics.EXACT_EMD_LIMIT", 2)
        report = emd(np.array([[0.0], [1.0]]), np.array([[0.5], [1.5]]))
        assert report.approximate
        assert report.value == pytest.approx(0.5, abs=0.02)
        assert report.to_dict()["approximate"] is True

    @pytest.mark.parametrize("bad", [
        (np.zeros((0, 2)), np.zeros((3, 2))),
        (np.zeros((3, 2)), np.zeros((3, 3))),
    ])
    def test_invalid_clouds(self, bad):
        with pytest.raises(InvalidArgumentError):
            energy_distance(*bad)
        with pytest.raises(InvalidArgumentError):
            emd(*bad)

    def test_unknown_ground_cost(self):
        with pytest.raises(InvalidArgumentError):
            emd(np.zeros((2, 1)), np.ones((2, 1)), metric="cityblock")


class TestForceError:
    LAW = Gaussian(np.zeros(2), np.eye(2))

    def test_identical_fields(self):
        f = lambda t, X: 2.0 * X
        report = force_error(f, f, lambda t: self.LAW, [0.2, 0.8], n_mc=64)
        assert report.value == 0.0
        assert report.stderr == 0.0

    def test_constant_offset(self):
        f = lambda t, X: X
        g = lambda t, X: X + np.array([3.0, 4.0])
        report = force_error(f, g, [self.LAW, self.LAW], [0.1, 0.9], n_mc=32)
        assert report.value == pytest.approx(5.0)
        assert report.details == {"t=0.1": pytest.approx(5.0), "t=0.9": pytest.approx(5.0)}

    def test_linear_difference_matches_trace(self):
        M = np.array([[1.0, 0.5], [0.0, 2.0]])
        report = force_error(lambda t, X: X @ M.T, lambda t, X: np.zeros_like(X), [self.LAW], [0.5],
                             n_mc=200_000, seed=4)
        assert report.value == pytest.approx(np.sqrt(np.trace(M @ M.T)), abs=5 * report.stderr + 1e-3)

    def test_seeded(self):
        f = lambda t, X: X ** 2
        g = lambda t, X: X
        a = force_error(f, g, [self.LAW], [0.5], n_mc=100, seed=1)
        b = force_error(f, g, [self.LAW], [0.5], n_mc=100, seed=1)
        assert a.value == b.value

    def test_law_count_mismatch(self):
        f = lambda t, X: X
        with pytest.raises(InvalidArgumentError):
            force_error(f, f, [self.LAW], [0.1, 0.2])
        with pytest.raises(InvalidArgumentError):
            force_error(f, f, [], [])


def test_report_to_dict():
    report = MetricReport("bw2", 0.5, (10, 12), stderr=0.1, details={"t=0.5": 0.5})
    assert report.to_dict() == {"name": "bw2", "value": 0.5, "sizes": [10, 12], "stderr": 0.1,
                                "details": {"t=0.5": 0.5}}
