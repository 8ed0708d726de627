import json

import numpy as np
import pytest

from app.core import Gaussian, KernelCache, OUProcess
from app.errors import ConfigError, DataError, InvalidArgumentError, TrainingError
from app.fm import Checkpoint, TrainConfig, prepare_segments, sb_drift, train
from app.fields import get_field
from app.gsb import GSBProblem, GSBSolution
from app.metrics import force_error
from app.sim import Snapshot, planted_ou_snapshots

FAST = dict(iterations=30, batch=32, hidden=(16, 16), lr=5e-3)


@pytest.fixture
def snapshots(damped):
    rho0 = Gaussian(np.array([0.5, -0.5]), 0.2 * np.eye(2))
    return planted_ou_snapshots(damped, rho0, [0.0, 0.5, 1.0, 1.5], n=40, seed=3)


class TestTrainConfig:
    def test_defaults_round_trip(self):
        config = TrainConfig()
        assert TrainConfig.from_dict(config.to_dict()) == config
        assert config.to_dict()["hidden"] == [64, 64, 64]

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown keys in train"):
            TrainConfig.from_dict({"learning_rate": 0.1})

    @pytest.mark.parametrize("bad", [
        {"batch": 0}, {"lr": -1.0}, {"betas": (0.9, 1.0)}, {"score_weighting": "snr"}, {"sinkhorn_epsilon": 0.0},
    ])
    def test_validation(self, bad):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)


class TestSegments:
    def test_equal_lengths_share_cache(self, snapshots, damped):
        segments = prepare_segments(snapshots, damped, TrainConfig(cache_nodes=65))
        assert [s.index for s in segments] == [0, 1, 2]
        assert segments[0].cache is segments[1].cache is segments[2].cache
        assert all(s.coupling.converged for s in segments)
        np.testing.assert_allclose(segments[1].coupling.plan.sum(), 1.0, atol=1e-8)

    def test_dimension_mismatch(self, snapshots):
        with pytest.raises(TrainingError):
            prepare_segments(snapshots, OUProcess.brownian(3), TrainConfig())

    def test_sinkhorn_failure_names_segment(self, snapshots, damped):
        config = TrainConfig(sinkhorn_epsilon=1e-3, sinkhorn_max_iters=2, sinkhorn_tol=1e-14, cache_nodes=65)
        with pytest.raises(TrainingError) as info:
            prepare_segments(snapshots, damped, config)
        assert info.value.segment == 0


class TestTraining:
    def test_checkpoint_metadata(self, snapshots, damped):
        ckpt = train(snapshots, damped, TrainConfig(seed=1, **FAST))
        assert ckpt.arch == [3, 16, 16, 2]
        assert ckpt.meta["time_origin"] == 0.0
        assert ckpt.meta["time_span"] == pytest.approx(1.5)
        assert ckpt.meta["snapshot_times"] == pytest.approx([0.0, 0.5, 1.0, 1.5])
        assert len(ckpt.meta["loss_history"]) == 30
        assert np.all(np.isfinite(ckpt.meta["loss_history"]))

    def test_seed_determinism(self, snapshots, damped):
        a = train(snapshots, damped, TrainConfig(seed=7, **FAST))
        b = train(snapshots, damped, TrainConfig(seed=7, **FAST))
        c = train(snapshots, damped, TrainConfig(seed=8, **FAST))
        np.testing.assert_array_equal(a.flow_net.get_flat(), b.flow_net.get_flat())
        np.testing.assert_array_equal(a.score_net.get_flat(), b.score_net.get_flat())
        assert not np.array_equal(a.flow_net.get_flat(), c.flow_net.get_flat())

    def test_thread_count_does_not_change_result(self, snapshots, damped):
        a = train(snapshots, damped, TrainConfig(seed=2, **FAST), threads=1)
        b = train(snapshots, damped, TrainConfig(seed=2, **FAST), threads=3)
        np.testing.assert_array_equal(a.flow_net.get_flat(), b.flow_net.get_flat())

    def test_needs_two_snapshots(self, damped):
        with pytest.raises(InvalidArgumentError):
            train([Snapshot(0.0, np.zeros((4, 2)))], damped, TrainConfig(**FAST))

    @pytest.mark.slow
    def test_loss_decreases(self, snapshots, damped):
        ckpt = train(snapshots, damped, TrainConfig(seed=0, iterations=600, batch=64, hidden=(32, 32), lr=3e-3))
        history = np.array(ckpt.meta["loss_history"])
        # score targets are heavy tailed near the pinned ends; compare medians
        assert np.median(history[-100:]) < 0.8 * np.median(history[:100])

    @pytest.mark.slow
    def test_point_masses_give_constant_flow(self):
        x0, x1 = np.array([0.0, 0.0]), np.array([1.0, 2.0])
        snaps = [Snapshot(0.0, np.tile(x0, (64, 1))), Snapshot(1.0, np.tile(x1, (64, 1)))]
        config = TrainConfig(seed=0, iterations=3000, batch=256, hidden=(64, 64), lr=3e-3, cache_nodes=129)
        ckpt = train(snaps, OUProcess.brownian(2), config)
        times = np.linspace(0.1, 0.9, 9)
        path = x0 + times[:, None] * (x1 - x0)
        deviation = [np.abs(ckpt.flow(t, p[None]) - (x1 - x0)).max() for t, p in zip(times, path)]
        assert max(deviation) < 0.1

    @pytest.mark.slow
    def test_drift_matches_gaussian_bridge(self, rotation, rng):
        rho0 = Gaussian(np.array([-1.0, 0.0]), 0.3 * np.eye(2))
        rho1 = Gaussian(np.array([1.0, 0.5]), np.array([[0.5, 0.1], [0.1, 0.2]]))
        cache = KernelCache(rotation, 1.0, nodes=129)
        solution = GSBSolution(GSBProblem(rotation, cache, rho0, rho1))
        snaps = [Snapshot(0.0, rho0.sample(512, rng)), Snapshot(1.0, rho1.sample(512, rng))]
        config = TrainConfig(seed=0, iterations=3000, batch=128, hidden=(64, 64), lr=3e-3, cache_nodes=129)
        ckpt = train(snaps, rotation, config)
        times = [0.2, 0.35, 0.5, 0.65, 0.8]
        exact = get_field("gsb-drift", solution)
        error = force_error(lambda t, X: sb_drift(ckpt, t, X), exact, solution.marginal, times, 512, seed=1)
        scale = force_error(exact, lambda t, X: np.zeros_like(X), solution.marginal, times, 512, seed=1)
        assert error.value < 0.35 * scale.value


class TestCheckpoint:
    def test_round_trip(self, snapshots, damped, tmp_path, rng):
        ckpt = train(snapshots, damped, TrainConfig(seed=1, **FAST))
        path = tmp_path / "checkpoint.json"
        path.write_text(json.dumps(ckpt.to_dict()), encoding="utf-8")
        loaded = Checkpoint.load(path)
        X = rng.standard_normal((4, 2))
        np.testing.assert_allclose(loaded.drift(0.7, X), ckpt.drift(0.7, X), rtol=1e-12)
        np.testing.assert_allclose(sb_drift(loaded, 0.7, X), ckpt.drift(0.7, X), rtol=1e-12)
        assert loaded.process == damped

    def test_network_time_is_normalized(self, snapshots, damped, rng):
        ckpt = train(snapshots, damped, TrainConfig(seed=1, **FAST))
        X = rng.standard_normal((3, 2))
        np.testing.assert_allclose(ckpt.flow(0.75, X), ckpt.flow_net.forward(0.5, X))

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("meta"),
        lambda d: d.update(extra=1),
        lambda d: d.update(arch=[3, 5, 2]),
    ])
    def test_invalid_documents(self, snapshots, damped, mutate):
        data = train(snapshots, damped, TrainConfig(seed=1, **FAST)).to_dict()
        mutate(data)
        with pytest.raises(DataError):
            Checkpoint.from_dict(data)
