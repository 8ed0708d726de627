import numpy as np
import pytest

from app.bridge import BridgePin, bridge_flow, bridge_score
from app.errors import InvalidArgumentError
from app.fm import FeedForwardNet, FlowBatch, cfm_loss, conditional_targets, regression_loss, score_weights


@pytest.fixture
def batch(rng):
    n = 8
    return FlowBatch(t=rng.uniform(0.1, 0.9, n), x0=rng.standard_normal((n, 2)),
                     xT=rng.standard_normal((n, 2)) + 1.0, z=rng.standard_normal((n, 2)))


def test_conditional_targets_match_pinned_bridge(damped_cache, batch):
    u, s, omega = conditional_targets(damped_cache, batch)
    assert omega.shape == (8, 2, 2)
    for j in range(8):
        pin = BridgePin(batch.x0[j], batch.xT[j], 1.0)
        np.testing.assert_allclose(u[j], bridge_flow(damped_cache, pin, batch.t[j], batch.z[j]), rtol=1e-9)
        np.testing.assert_allclose(s[j], bridge_score(damped_cache, pin, batch.t[j], batch.z[j]), rtol=1e-9)


def test_brownian_targets(brownian_cache, batch):
    u, s, _ = conditional_targets(brownian_cache, batch)
    t = batch.t[:, None]
    xbar = t * batch.xT + (1 - t) * batch.x0
    np.testing.assert_allclose(s, (xbar - batch.z) / (t * (1 - t)), rtol=1e-7)
    np.testing.assert_allclose(u, (1 - 2 * t) / (2 * t * (1 - t)) * (batch.z - xbar) + batch.xT - batch.x0,
                               rtol=1e-7)


def test_score_weights():
    omega = np.stack([np.eye(2), 4 * np.eye(2)])
    np.testing.assert_allclose(score_weights(omega), [1.0, 1.0])
    np.testing.assert_allclose(score_weights(omega, "constant", 0.5), [0.5, 0.5])
    np.testing.assert_allclose(score_weights(omega, "omega_trace", 2.0), [2.0, 8.0])
    with pytest.raises(InvalidArgumentError):
        score_weights(omega, "snr")


def test_regression_loss_value_and_gradient(rng):
    flow_net = FeedForwardNet([3, 6, 2], rng)
    score_net = FeedForwardNet([3, 6, 2], rng)
    n = 5
    t, z = rng.random(n), rng.standard_normal((n, 2))
    u_t, s_t, w = rng.standard_normal((n, 2)), rng.standard_normal((n, 2)), rng.random(n)
    result = regression_loss(flow_net, score_net, t, z, u_t, s_t, w)

    flow_sq = np.mean(np.sum((flow_net.forward(t, z) - u_t) ** 2, axis=1))
    score_sq = np.mean(w * np.sum((score_net.forward(t, z) - s_t) ** 2, axis=1))
    assert result.flow_loss == pytest.approx(flow_sq)
    assert result.score_loss == pytest.approx(score_sq)
    assert result.loss == pytest.approx(flow_sq + score_sq)

    flat = score_net.get_flat()
    analytic = np.concatenate([g.ravel() for g in result.score_grads])
    h = 1e-6
    for k in (0, 3, flat.size - 1):
        bumped = flat.copy()
        bumped[k] += h
        score_net.set_flat(bumped)
        up = regression_loss(flow_net, score_net, t, z, u_t, s_t, w).score_loss
        bumped[k] -= 2 * h
        score_net.set_flat(bumped)
        down = regression_loss(flow_net, score_net, t, z, u_t, s_t, w).score_loss
        assert (up - down) / (2 * h) == pytest.approx(analytic[k], rel=1e-4, abs=1e-8)
    score_net.set_flat(flat)


def test_cfm_loss_defaults_network_time(rotation_cache, batch, rng):
    nets = (FeedForwardNet([3, 4, 2], rng), FeedForwardNet([3, 4, 2], rng))
    result = cfm_loss(nets, rotation_cache, batch)
    explicit = FlowBatch(batch.t, batch.x0, batch.xT, batch.z, net_time=batch.t / rotation_cache.horizon)
    again = cfm_loss(nets, rotation_cache, explicit)
    assert np.isfinite(result.loss)
    assert result.loss == pytest.approx(again.loss)
    assert len(result.flow_grads) == len(nets[0].parameters())
