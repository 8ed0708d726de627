"""
Conditional flow and score matching objective.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ..bridge import batch_flow, batch_score, bridge_terms
from ..core.kernels import KernelCache
from ..errors import InvalidArgumentError
from .networks import FeedForwardNet

SCORE_WEIGHTINGS = ("constant", "omega_trace")


@dataclass
class FlowBatch:
    """
    One minibatch of bridge points.

    Attributes:
        t: Bridge-local times (n,)
        x0: Source endpoints (n, d)
        xT: Target endpoints (n, d)
        z: Points drawn from the bridge at t (n, d)
        net_time: Normalized network time input (n,); defaults to t / T
    """

    t: np.ndarray
    x0: np.ndarray
    xT: np.ndarray
    z: np.ndarray
    net_time: Optional[np.ndarray] = None


@dataclass
class LossResult:
    loss: float
    flow_loss: float
    score_loss: float
    flow_grads: List[np.ndarray]
    score_grads: List[np.ndarray]


def score_weights(omega: np.ndarray, weighting: str = "constant", scale: float = 1.0) -> np.ndarray:
    """
    Per-row weight λ_t on the score term.

    Args:
        omega: Bridge covariances (n, d, d)
        weighting: "constant" (λ = scale) or "omega_trace" (λ = scale·tr(Ω_t)/d)
        scale: Multiplier
    """
    n, d, _ = omega.shape
    if weighting == "constant":
        return np.full(n, float(scale))
    if weighting == "omega_trace":
        return scale * np.trace(omega, axis1=1, axis2=2) / d
    raise InvalidArgumentError(f"unknown score weighting {weighting!r}; expected one of {SCORE_WEIGHTINGS}")


def conditional_targets(cache: KernelCache, batch: FlowBatch):
    """
    Bridge flow and score at the batch points.

    Returns:
        (u_target, s_target, omega)
    """
    ts = cache.clamp(cache.check_times(batch.t))
    terms = bridge_terms(cache, ts, batch.x0, batch.xT)
    return batch_flow(cache, terms, batch.z), batch_score(terms, batch.z), terms.omega


def regression_loss(
    flow_net: FeedForwardNet,
    score_net: FeedForwardNet,
    net_time: np.ndarray,
    z: np.ndarray,
    u_target: np.ndarray,
    s_target: np.ndarray,
    weights: np.ndarray,
) -> LossResult:
    """
    mean_j ‖u_θ(z_j) - u*_j‖² + λ_j ‖s_φ(z_j) - s*_j‖² and its parameter gradients.
    """
    n = z.shape[0]
    u = flow_net.forward(net_time, z)
    s = score_net.forward(net_time, z)
    du = u - u_target
    ds = s - s_target
    flow_sq = np.sum(du * du, axis=1)
    score_sq = weights * np.sum(ds * ds, axis=1)
    flow_grads = flow_net.backward(2.0 * du / n)
    score_grads = score_net.backward(2.0 * weights[:, None] * ds / n)
    flow_loss = float(flow_sq.mean())
    score_loss = float(score_sq.mean())
    return LossResult(flow_loss + score_loss, flow_loss, score_loss, flow_grads, score_grads)


def cfm_loss(
    nets: Tuple[FeedForwardNet, FeedForwardNet],
    cache: KernelCache,
    batch: FlowBatch,
    weighting: str = "constant",
    score_scale: float = 1.0,
) -> LossResult:
    """
    Flow and score matching loss against the exact bridge targets.

    Args:
        nets: (flow network u_θ, score network s_φ)
        cache: Kernel cache over the bridge horizon
        batch: Times, endpoints and bridge points
        weighting: Score weighting rule
        score_scale: λ for the constant rule, multiplier otherwise
    """
    flow_net, score_net = nets
    u_target, s_target, omega = conditional_targets(cache, batch)
    net_time = batch.net_time if batch.net_time is not None else np.asarray(batch.t) / cache.horizon
    weights = score_weights(omega, weighting, score_scale)
    return regression_loss(flow_net, score_net, net_time, batch.z, u_target, s_target, weights)
