import numpy as np
import pytest

from app.bridge import BridgePin, bridge_flow
from app.core import Gaussian
from app.errors import InvalidArgumentError
from app.fields import (
    BridgeFlowField,
    GSBDriftField,
    LearnedDriftField,
    LearnedFlowField,
    LinearField,
    VectorField,
    get_field,
    register_field,
)
from app.fm import Checkpoint, FeedForwardNet
from app.gsb import GSBProblem, solve


@pytest.fixture
def checkpoint(damped):
    rng = np.random.default_rng(0)
    return Checkpoint(FeedForwardNet([3, 8, 2], rng), FeedForwardNet([3, 8, 2], rng), damped,
                      {"time_origin": 0.0, "time_span": 2.0})


def test_reference_field(rotation, rng):
    X = rng.standard_normal((4, 2))
    field = get_field("reference", rotation)
    np.testing.assert_allclose(field(0.3, X), (X - rotation.target) @ rotation.drift.T)


def test_linear_field():
    field = get_field("linear", np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([1.0, 0.0]))
    np.testing.assert_allclose(field(0.0, np.array([2.0, 3.0])), [[4.0, -2.0]])


def test_bridge_flow_field_matches_scalar_operation(damped_cache, rng):
    pin = BridgePin(np.array([0.2, 0.1]), np.array([-0.4, 0.9]), 1.0)
    field = BridgeFlowField(damped_cache, pin)
    X = rng.standard_normal((3, 2))
    out = field(0.35, X)
    for i in range(3):
        np.testing.assert_allclose(out[i], bridge_flow(damped_cache, pin, 0.35, X[i]), rtol=1e-10)


def test_gsb_field(damped, damped_cache, rng):
    sol = solve(GSBProblem(damped, damped_cache, Gaussian(np.zeros(2), np.eye(2)),
                           Gaussian(np.ones(2), 0.5 * np.eye(2))))
    X = rng.standard_normal((5, 2))
    np.testing.assert_allclose(GSBDriftField(sol)(0.6, X), sol.drift(0.6, X))


def test_learned_fields(checkpoint, damped, rng):
    X = rng.standard_normal((6, 2))
    flow = LearnedFlowField(checkpoint)(1.0, X)
    drift = LearnedDriftField(checkpoint)(1.0, X)
    np.testing.assert_allclose(flow, checkpoint.flow_net.forward(0.5, X))
    np.testing.assert_allclose(drift - flow, checkpoint.score_net.forward(0.5, X) @ damped.diffusivity.T)


def test_registry():
    class Zero(VectorField):
        name = "zero"

        def __call__(self, t, X):
            return np.zeros_like(np.atleast_2d(X))

    register_field("zero", Zero)
    assert np.all(get_field("zero")(0.0, np.ones((2, 2))) == 0)
    with pytest.raises(TypeError):
        register_field("bad", dict)
    with pytest.raises(InvalidArgumentError):
        get_field("unknown")
