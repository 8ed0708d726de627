"""
Iterated reference refitting: alternate bridge training with ridge
regression of the learned drift onto an affine OU drift A(x - m).
"""

import logging
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.linear_model import RidgeCV
from sklearn.model_selection import KFold

from .console import progress
from .core.kernels import KernelCache
from .core.process import Gaussian, OUProcess
from .errors import ConfigError, InvalidArgumentError, NumericalError, TrainingError
from .fm.checkpoint import Checkpoint
from .fm.trainer import TrainConfig, train
from .gsb import GSBProblem, GSBSolution
from .metrics import bw2, emd, energy_distance, fit_gaussian
from .sim.generators import Snapshot, check_snapshots
from .sim.integrators import euler_maruyama

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2)
MAX_CONDITION = 1e8
# refitting needs three snapshots once one is held out
MIN_LOO_SNAPSHOTS = 4


@dataclass
class ReferenceFit:
    """Result of one ridge fit of v ≈ A(x - m)."""

    drift: np.ndarray
    target: np.ndarray
    alpha: float
    residual_mse: float
    condition: float
    target_recovered: bool
    warnings: List[str] = field(default_factory=list)

    def as_process(self, diffusion: np.ndarray) -> OUProcess:
        """
        Raises:
            NumericalError: If the fitted drift is singular while the target is nonzero
        """
        if np.any(self.target) and np.linalg.matrix_rank(self.drift) < self.drift.shape[0]:
            raise NumericalError(f"fitted drift is singular (cond {self.condition:.3e}) with a nonzero target")
        return OUProcess(self.drift, self.target, diffusion)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "residual_mse": self.residual_mse,
            "condition": self.condition,
            "target_recovered": self.target_recovered,
            "warnings": list(self.warnings),
        }


def ridge_fit(
    X: np.ndarray,
    V: np.ndarray,
    lambda_grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
    folds: int = 5,
    previous_target: Optional[np.ndarray] = None,
    sample_weight: Optional[np.ndarray] = None,
    seed: int = 0,
) -> ReferenceFit:
    """
    Fit v ≈ Bx + c by ridge regression and read off A = B, m = -B⁻¹c.

    The same λ penalizes B and the intercept c; λ is chosen by K-fold
    cross-validation on drift MSE. The penalty acts on c = -Bm, not on m:
    strong penalties pull c towards 0, and the read-off m = -B⁻¹c is not
    shrunk towards the origin. Centre X first if m itself should be
    regularized.

    Args:
        X: States (n, d)
        V: Drift evaluations (n, d)
        lambda_grid: Candidate penalties; nonpositive entries are dropped
        folds: Cross-validation folds
        previous_target: m kept when B is ill conditioned
        sample_weight: Optional per-row weights
        seed: Fold shuffling seed

    Raises:
        InvalidArgumentError: On too few samples or an empty grid
    """
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    if X.ndim != 2 or X.shape != V.shape:
        raise InvalidArgumentError("X and V must be (n, d) arrays of the same shape")
    n, d = X.shape
    if n < d + 1:
        raise InvalidArgumentError(f"need at least d + 1 = {d + 1} samples, got {n}")
    warnings: List[str] = []
    grid = sorted(float(l) for l in lambda_grid if l > 0)
    if len(grid) < len(list(lambda_grid)):
        warnings.append("nonpositive penalties removed from the grid")
    if not grid:
        raise InvalidArgumentError("lambda grid has no positive values")

    design = np.hstack([X, np.ones((n, 1))])
    model = RidgeCV(
        alphas=grid,
        fit_intercept=False,
        cv=KFold(n_splits=min(folds, n), shuffle=True, random_state=seed),
        scoring="neg_mean_squared_error",
    )
    model.fit(design, V, sample_weight=sample_weight)
    coef = np.atleast_2d(model.coef_)
    B = coef[:, :d]
    c = coef[:, d]
    residual = float(np.mean((design @ coef.T - V) ** 2))

    condition = float(np.linalg.cond(B))
    if np.isfinite(condition) and condition < MAX_CONDITION:
        target = -np.linalg.solve(B, c)
        recovered = True
    elif previous_target is not None:
        target = np.asarray(previous_target, dtype=float).copy()
        recovered = False
        warnings.append(f"drift ill conditioned (cond {condition:.3e}); target m kept at previous value")
    else:
        target = -np.linalg.pinv(B) @ c
        recovered = False
        warnings.append(f"drift ill conditioned (cond {condition:.3e}); target m from pseudo-inverse")
    for message in warnings:
        logger.warning(message)
    return ReferenceFit(B, target, float(model.alpha_), residual, condition, recovered, warnings)


@dataclass
class RefitConfig:
    """Outer-loop settings."""

    outer_iters: int = 5
    lambda_grid: Tuple[float, ...] = DEFAULT_LAMBDA_GRID
    folds: int = 5
    sde_step: float = 1e-2
    held_out: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        self.lambda_grid = tuple(float(l) for l in self.lambda_grid)
        if self.held_out is not None:
            self.held_out = tuple(int(i) for i in self.held_out)
        if self.outer_iters < 1:
            raise ConfigError("outer_iters must be >= 1")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.sde_step <= 0:
            raise ConfigError("sde_step must be positive")

    @classmethod
    def from_dict(cls, data: Dict[str, Any], where: str = "refit") -> "RefitConfig":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
        return cls(**data)


@dataclass
class RefitIteration:
    """One outer iteration: the reference used, the trained bridge, and the fit it produced."""

    index: int
    process: OUProcess
    checkpoint: Checkpoint
    fit: ReferenceFit
    relative_change: float


@dataclass
class RefitState:
    """Append-only history of the outer loop."""

    initial_process: OUProcess
    iterations: List[RefitIteration] = field(default_factory=list)

    def append(self, entry: RefitIteration) -> None:
        if entry.index != len(self.iterations):
            raise InvalidArgumentError("refit history is append-only")
        self.iterations.append(entry)

    @property
    def iteration(self) -> int:
        return len(self.iterations)

    @property
    def current_process(self) -> OUProcess:
        """Reference fitted by the latest iteration."""
        if not self.iterations:
            return self.initial_process
        last = self.iterations[-1]
        return last.fit.as_process(last.process.diffusion)

    def summary(self) -> List[Dict[str, Any]]:
        return [
            {
                "iteration": it.index,
                "process": it.process.to_dict(),
                "fitted": it.fit.as_process(it.process.diffusion).to_dict(),
                "fit": it.fit.to_dict(),
                "relative_change_A": it.relative_change,
            }
            for it in self.iterations
        ]


def drift_at_snapshots(checkpoint: Checkpoint, snapshots: Sequence[Snapshot]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack states and learned drift at every snapshot sample and its time."""
    X = np.vstack([s.samples for s in snapshots])
    V = np.vstack([checkpoint.drift(s.time, s.samples) for s in snapshots])
    return X, V


def iterated_refit(
    snapshots: Sequence[Snapshot],
    initial_process: OUProcess,
    outer_iters: int = 5,
    config: Optional[TrainConfig] = None,
    refit_config: Optional[RefitConfig] = None,
    threads: int = 1,
    show_progress: bool = False,
) -> RefitState:
    """
    Alternate bridge training and ridge refits of (A, m); σ stays fixed.

    Iteration i trains with seed ``config.seed + i`` against the current
    reference, evaluates the learned drift at the snapshot points and refits.

    Raises:
        InvalidArgumentError: With fewer than 3 snapshots
        TrainingError: When training fails, carrying the iteration index
    """
    snaps = check_snapshots(snapshots, minimum=3)
    config = config or TrainConfig()
    refit_config = refit_config or RefitConfig(outer_iters=outer_iters)
    state = RefitState(initial_process)
    process = initial_process
    with progress(show_progress) as bar:
        task = bar.add_task("[info]Refitting reference", total=outer_iters)
        for i in range(outer_iters):
            try:
                checkpoint = train(snaps, process, replace(config, seed=config.seed + i), threads=threads)
            except NumericalError as exc:
                raise TrainingError(str(exc), iteration=i)
            X, V = drift_at_snapshots(checkpoint, snaps)
            fit = ridge_fit(X, V, refit_config.lambda_grid, refit_config.folds,
                            previous_target=process.target, seed=config.seed + i)
            old = np.linalg.norm(process.drift)
            new = np.linalg.norm(fit.drift)
            change = float(np.linalg.norm(fit.drift - process.drift) / max(old, new, 1e-12))
            state.append(RefitIteration(i, process, checkpoint, fit, change))
            logger.info("refit iteration %d: alpha=%.1e, rel. change in A=%.3g", i, fit.alpha, change)
            process = fit.as_process(process.diffusion)
            bar.advance(task)
    return state


def gaussian_heldout_interpolation(
    snapshots: Sequence[Snapshot],
    held_out: int,
    process: OUProcess,
    nodes: int = 257,
) -> Tuple[Gaussian, float]:
    """
    Predict a held-out snapshot from Gaussian fits of its neighbours.

    Solves the Gaussian bridge between the fitted laws at t_{i-1} and t_{i+1}
    under ``process`` and compares its marginal at t_i with the Gaussian fit
    of the held-out samples.

    Returns:
        (predicted Gaussian, BW² to the held-out fit)
    """
    snaps = list(snapshots)
    _check_interior(held_out, len(snaps))
    prev, mid, nxt = snaps[held_out - 1], snaps[held_out], snaps[held_out + 1]
    cache = KernelCache(process, nxt.time - prev.time, nodes=nodes)
    problem = GSBProblem(process, cache, fit_gaussian(prev.samples), fit_gaussian(nxt.samples))
    predicted = GSBSolution(problem).marginal(mid.time - prev.time)
    return predicted, bw2(predicted, fit_gaussian(mid.samples))


def _check_interior(index: int, count: int) -> None:
    if not 1 <= index <= count - 2:
        raise InvalidArgumentError(f"held-out index must be interior (1..{count - 2}), got {index}")


@dataclass
class LeaveOneOutResult:
    """Per-iterate predictions and scores for one held-out snapshot."""

    held_out: int
    time: float
    predictions: List[np.ndarray]
    metrics: List[Dict[str, float]]
    state: RefitState

    def to_dict(self) -> Dict[str, Any]:
        return {"held_out": self.held_out, "time": self.time, "metrics": self.metrics}


def leave_one_out(
    snapshots: Sequence[Snapshot],
    held_out: int,
    initial_process: OUProcess,
    config: Optional[TrainConfig] = None,
    refit_config: Optional[RefitConfig] = None,
    threads: int = 1,
) -> LeaveOneOutResult:
    """
    Refit without one interior snapshot and predict it from its predecessor.

    For every iterate, samples of snapshot i-1 are pushed to t_i with
    Euler-Maruyama under the learned drift and the reference σ, then scored
    by EMD and energy distance; the Gaussian-bridge interpolation with that
    iterate's reference is scored by BW².

    Raises:
        InvalidArgumentError: If ``held_out`` is an endpoint index
    """
    snaps = check_snapshots(snapshots, minimum=MIN_LOO_SNAPSHOTS)
    _check_interior(held_out, len(snaps))
    config = config or TrainConfig()
    refit_config = refit_config or RefitConfig()
    kept = [s for j, s in enumerate(snaps) if j != held_out]
    state = iterated_refit(kept, initial_process, refit_config.outer_iters, config, refit_config, threads)

    prev, target = snaps[held_out - 1], snaps[held_out]
    gap = target.time - prev.time
    steps = max(int(np.ceil(gap / refit_config.sde_step)), 1)
    grid = np.linspace(prev.time, target.time, steps + 1)
    predictions, metrics = [], []
    for it in state.iterations:
        traj = euler_maruyama(it.checkpoint.drift, it.process.diffusion, prev.samples, grid,
                              seed=[config.seed, held_out, it.index], save_times=[target.time])
        pred = traj.final
        predictions.append(pred)
        scores = {
            "iteration": float(it.index),
            "emd": emd(pred, target.samples).value,
            "energy": energy_distance(pred, target.samples),
        }
        try:
            scores["gsb_bw2"] = gaussian_heldout_interpolation(snaps, held_out, it.process)[1]
        except NumericalError as exc:
            logger.warning("Gaussian interpolation skipped for iterate %d: %s", it.index, exc)
        metrics.append(scores)
    return LeaveOneOutResult(held_out, target.time, predictions, metrics, state)
