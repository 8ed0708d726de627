"""
Training loop for the bridge flow and score networks over snapshot series.
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..bridge import batch_flow, batch_sample, batch_score, bridge_terms
from ..console import progress
from ..core.kernels import DEFAULT_NODES, KernelCache
from ..core.process import OUProcess
from ..eot import Coupling, mvou_cost, sample_coupling, sinkhorn
from ..errors import ConfigError, NumericalError, TrainingError
from ..sim.generators import Snapshot, check_snapshots
from .checkpoint import Checkpoint
from .loss import SCORE_WEIGHTINGS, regression_loss, score_weights
from .networks import AdamW, FeedForwardNet

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Optimizer, architecture and coupling settings."""

    batch: int = 64
    lr: float = 1e-2
    iterations: int = 2500
    betas: Tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 1e-2
    adam_eps: float = 1e-8
    hidden: Tuple[int, ...] = (64, 64, 64)
    score_weighting: str = "constant"
    score_weight: float = 1.0
    sinkhorn_epsilon: float = 1.0
    sinkhorn_max_iters: int = 10_000
    sinkhorn_tol: float = 1e-8
    cache_nodes: int = DEFAULT_NODES
    seed: int = 0

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.batch < 1 or self.iterations < 1 or self.lr <= 0:
            raise ConfigError("batch, iterations and lr must be positive")
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            raise ConfigError("betas must be two numbers in [0, 1)")
        if self.score_weighting not in SCORE_WEIGHTINGS:
            raise ConfigError(f"score_weighting must be one of {SCORE_WEIGHTINGS}")
        if self.sinkhorn_epsilon <= 0:
            raise ConfigError("sinkhorn_epsilon must be positive")

    @classmethod
    def from_dict(cls, data: Dict[str, Any], where: str = "train") -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["betas"] = list(self.betas)
        out["hidden"] = list(self.hidden)
        return out


@dataclass
class Segment:
    """Consecutive snapshot pair with its cache and coupling."""

    index: int
    start: float
    end: float
    source: np.ndarray
    target: np.ndarray
    cache: KernelCache
    coupling: Coupling

    @property
    def length(self) -> float:
        return self.end - self.start


def prepare_segments(
    snapshots: Sequence[Snapshot],
    process: OUProcess,
    config: TrainConfig,
    threads: int = 1,
) -> List[Segment]:
    """
    Solve the entropic coupling between each consecutive snapshot pair.

    Segments of equal length share one kernel cache.

    Raises:
        TrainingError: If Sinkhorn does not converge on a segment, or the kernel is degenerate
    """
    snaps = check_snapshots(snapshots, minimum=2)
    if snaps[0].dim != process.dim:
        raise TrainingError(f"snapshots have dimension {snaps[0].dim}, process has {process.dim}")
    caches: Dict[float, KernelCache] = {}
    segments = []
    for j, (s0, s1) in enumerate(zip(snaps[:-1], snaps[1:])):
        length = s1.time - s0.time
        key = round(length, 12)
        if key not in caches:
            caches[key] = KernelCache(process, length, nodes=config.cache_nodes)
        cache = caches[key]
        try:
            cost = mvou_cost(cache, s0.samples, s1.samples, threads=threads)
        except NumericalError as exc:
            raise TrainingError(f"cost assembly failed: {exc}", segment=j)
        coupling = sinkhorn(cost, epsilon=config.sinkhorn_epsilon, max_iters=config.sinkhorn_max_iters,
                            tol=config.sinkhorn_tol)
        if not coupling.converged:
            raise TrainingError(
                f"Sinkhorn did not converge (marginal error {coupling.marginal_error:.3e} "
                f"after {coupling.iterations} iterations)", segment=j)
        logger.debug("segment %d: [%g, %g] sinkhorn %d iterations", j, s0.time, s1.time, coupling.iterations)
        segments.append(Segment(j, s0.time, s1.time, s0.samples, s1.samples, cache, coupling))
    return segments


def _draw_batch(segments: List[Segment], config: TrainConfig, rng: np.random.Generator):
    lengths = np.array([s.length for s in segments])
    seg_idx = rng.choice(len(segments), size=config.batch, p=lengths / lengths.sum())
    groups = []
    for j in np.unique(seg_idx):
        seg = segments[j]
        count = int(np.sum(seg_idx == j))
        pairs = sample_coupling(seg.coupling, count, rng)
        eps = seg.cache.eps
        t_local = rng.uniform(eps, seg.length - eps, size=count)
        groups.append((seg, t_local, seg.source[pairs[:, 0]], seg.target[pairs[:, 1]]))
    return groups


def train(
    snapshots: Sequence[Snapshot],
    process: OUProcess,
    config: Optional[TrainConfig] = None,
    threads: int = 1,
    show_progress: bool = False,
) -> Checkpoint:
    """
    Fit u_θ and s_φ to the bridges of the entropic couplings between snapshots.

    One pair of networks covers all segments over global time; the network time
    input is (t - t_first) / (t_last - t_first).

    Args:
        snapshots: Two or more snapshots with increasing times
        process: Reference process
        config: Training settings
        threads: Workers for cost assembly
        show_progress: Render a progress bar

    Returns:
        Checkpoint with loss history in ``meta``

    Raises:
        TrainingError: On coupling failure (with segment index) or non-finite loss
    """
    config = config or TrainConfig()
    segments = prepare_segments(snapshots, process, config, threads)
    origin = segments[0].start
    span = segments[-1].end - origin

    rng = np.random.default_rng(config.seed)
    flow_net = FeedForwardNet.for_dim(process.dim, config.hidden, rng)
    score_net = FeedForwardNet.for_dim(process.dim, config.hidden, rng)
    opt_kwargs = dict(lr=config.lr, betas=config.betas, weight_decay=config.weight_decay, eps=config.adam_eps)
    flow_opt = AdamW(flow_net.parameters(), **opt_kwargs)
    score_opt = AdamW(score_net.parameters(), **opt_kwargs)

    history: List[float] = []
    with progress(show_progress) as bar:
        task = bar.add_task("[info]Training flow/score networks", total=config.iterations)
        for it in range(config.iterations):
            times, zs, us, ss, ws = [], [], [], [], []
            for seg, t_local, x0, xT in _draw_batch(segments, config, rng):
                terms = bridge_terms(seg.cache, t_local, x0, xT)
                z = batch_sample(terms, rng)
                zs.append(z)
                us.append(batch_flow(seg.cache, terms, z))
                ss.append(batch_score(terms, z))
                ws.append(score_weights(terms.omega, config.score_weighting, config.score_weight))
                times.append((seg.start + t_local - origin) / span)
            result = regression_loss(flow_net, score_net, np.concatenate(times), np.vstack(zs),
                                     np.vstack(us), np.vstack(ss), np.concatenate(ws))
            if not np.isfinite(result.loss):
                raise TrainingError(f"loss became non-finite at iteration {it}")
            flow_opt.step(result.flow_grads)
            score_opt.step(result.score_grads)
            history.append(result.loss)
            bar.advance(task)

    window = max(1, config.iterations // 10)
    logger.info("training done: loss first-10%% %.4g, last-10%% %.4g",
                float(np.mean(history[:window])), float(np.mean(history[-window:])))
    meta = {
        "iterations": config.iterations,
        "seed": config.seed,
        "loss_history": history,
        "time_origin": origin,
        "time_span": span,
        "snapshot_times": [s.start for s in segments] + [segments[-1].end],
        "config": config.to_dict(),
    }
    return Checkpoint(flow_net, score_net, process, meta)
