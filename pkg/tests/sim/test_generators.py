import numpy as np
import pytest

from app.core import Gaussian, KernelCache, OUProcess
from app.errors import InvalidArgumentError
from app.sim import (
    RepressilatorParams,
    Snapshot,
    check_snapshots,
    gaussian_benchmark,
    gaussian_mixture_data,
    planted_ou_snapshots,
    inhibition_pattern_match,
    repressilator_drift,
    repressilator_fixed_point,
    repressilator_jacobian,
    repressilator_snapshots,
    scale_drift,
)
from app.sim.generators import BENCH_DRIFT, BENCH_TARGET


class TestBenchmarks:
    @pytest.mark.parametrize("d", [2, 5, 20])
    def test_gaussian_benchmark_embedding(self, d):
        bench = gaussian_benchmark(d, seed=1, n=64)
        U = bench.embedding
        np.testing.assert_allclose(U.T @ U, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(bench.process.drift, U @ BENCH_DRIFT @ U.T, atol=1e-12)
        np.testing.assert_allclose(bench.process.target, U @ BENCH_TARGET, atol=1e-12)
        assert bench.samples0.shape == bench.samples1.shape == (64, d)
        assert bench.rho1.min_eigenvalue() == pytest.approx(0.1, abs=1e-9)
        np.testing.assert_allclose(U.T @ (bench.rho1.cov - 0.1 * np.eye(d)) @ U, [[1.55, -1.55], [-1.55, 1.55]],
                                   atol=1e-12)

    def test_gaussian_benchmark_seeded(self):
        a, b = gaussian_benchmark(4, seed=3), gaussian_benchmark(4, seed=3)
        np.testing.assert_array_equal(a.samples0, b.samples0)
        np.testing.assert_array_equal(a.embedding, b.embedding)

    def test_fixed_embedding(self):
        bench = gaussian_benchmark(2, U=np.eye(2))
        np.testing.assert_allclose(bench.rho0.cov, [[0.2, 0.005], [0.005, 0.2]])
        with pytest.raises(InvalidArgumentError):
            gaussian_benchmark(3, U=np.eye(2))
        with pytest.raises(InvalidArgumentError):
            gaussian_benchmark(1)

    def test_mixture(self):
        bench = gaussian_mixture_data(2, seed=0, n=4000, U=np.eye(2))
        upper = bench.samples1[bench.labels1 == 1]
        np.testing.assert_allclose(upper.mean(axis=0), [2.5, 2.5], atol=0.05)
        assert set(np.unique(bench.labels0)) == {0, 1}

    def test_scale_drift(self, rotation):
        np.testing.assert_allclose(scale_drift(rotation, 0.5).drift, 0.5 * rotation.drift)
        assert np.all(scale_drift(rotation, 0.0).drift == 0)
        with pytest.raises(InvalidArgumentError):
            scale_drift(rotation, -1.0)


def test_planted_snapshots_follow_exact_law(damped):
    rho0 = Gaussian(np.array([1.0, 0.0]), 0.1 * np.eye(2))
    snaps = planted_ou_snapshots(damped, rho0, [0.0, 0.5, 2.0], n=20_000, seed=1)
    cache = KernelCache(damped, 2.0, nodes=257)
    for snap in snaps:
        E = cache.exp(snap.time)
        mean = E @ (rho0.mean - damped.target) + damped.target
        cov = E @ rho0.cov @ E.T + cache.phi_at(snap.time)
        np.testing.assert_allclose(snap.samples.mean(axis=0), mean, atol=0.03)
        np.testing.assert_allclose(np.cov(snap.samples, rowvar=False), cov, atol=0.04)


def test_check_snapshots():
    good = [Snapshot(0.0, np.zeros((2, 2))), Snapshot(1.0, np.ones((3, 2)))]
    assert check_snapshots(good) == good
    with pytest.raises(InvalidArgumentError):
        check_snapshots(good[::-1])
    with pytest.raises(InvalidArgumentError):
        check_snapshots([good[0], Snapshot(1.0, np.ones((3, 3)))])
    with pytest.raises(InvalidArgumentError):
        check_snapshots(good, minimum=3)


class TestRepressilator:
    PARAMS = RepressilatorParams()

    def test_fixed_point(self):
        x = repressilator_fixed_point(self.PARAMS)
        np.testing.assert_allclose(repressilator_drift(self.PARAMS, x), 0.0, atol=1e-10)
        assert x[0] * (1 + x[0] ** 3) == pytest.approx(10.0)
        assert np.all(x == x[0])

    def test_jacobian_matches_finite_differences(self):
        x = np.array([1.2, 0.7, 2.3])
        h = 1e-6
        fd = np.column_stack([
            (repressilator_drift(self.PARAMS, x + h * e) - repressilator_drift(self.PARAMS, x - h * e))[0] / (2 * h)
            for e in np.eye(3)
        ])
        np.testing.assert_allclose(repressilator_jacobian(self.PARAMS, x), fd, rtol=1e-6, atol=1e-8)

    def test_snapshots(self):
        times = [0.0, 0.5, 1.0]
        snaps = repressilator_snapshots(n_per_snapshot=50, snapshot_times=times, seed=2, dt=1e-2)
        assert [s.time for s in snaps] == times
        assert all(s.samples.shape == (50, 3) for s in snaps)
        np.testing.assert_allclose(snaps[0].samples.mean(axis=0), [1.0, 1.0, 2.0], atol=0.05)

    def test_threads_do_not_change_snapshots(self):
        kwargs = dict(n_per_snapshot=20, snapshot_times=[0.0, 0.3, 0.6], seed=4, dt=1e-2)
        a = repressilator_snapshots(**kwargs)
        b = repressilator_snapshots(threads=3, **kwargs)
        for sa, sb in zip(a, b):
            np.testing.assert_array_equal(sa.samples, sb.samples)

    @pytest.mark.parametrize("bad", [{"beta": 0.0}, {"sigma": -0.1}])
    def test_invalid_params(self, bad):
        with pytest.raises(InvalidArgumentError):
            RepressilatorParams(**bad)

    def test_invalid_times(self):
        with pytest.raises(InvalidArgumentError):
            repressilator_snapshots(snapshot_times=[1.0, 0.5])

    def test_inhibition_pattern_match(self):
        J = repressilator_jacobian(self.PARAMS, repressilator_fixed_point(self.PARAMS))
        assert inhibition_pattern_match(J, J)
        # diagonal and zero entries of the Jacobian are not constrained
        relaxed = -0.1 * np.abs(J) + np.diag([5.0, 5.0, 5.0])
        assert inhibition_pattern_match(relaxed, J)
        flipped = J.copy()
        flipped[1, 0] = -flipped[1, 0]
        assert not inhibition_pattern_match(flipped, J)
