"""
Run configuration: one JSON document per run, validated before any computation.

Example::

    {
      "process": "process_rotation.json",
      "horizon": 1.0,
      "cache_nodes": 512,
      "seed": 0,
      "train": {"iterations": 2500, "batch": 64},
      "sinkhorn": {"epsilon": 1.0},
      "refit": {"outer_iters": 5},
      "sim": {"dt": 0.001},
      "metrics": {"emd_metric": "euclidean"},
      "output_dir": "runs/rotation"
    }
"""

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .core.kernels import DEFAULT_NODES
from .core.process import OUProcess
from .errors import ConfigError, DataError, InvalidArgumentError
from .fm.trainer import TrainConfig
from .processors.json_processor import resolve_process
from .refit import RefitConfig

TOP_LEVEL_KEYS = {"process", "horizon", "cache_nodes", "seed", "train", "sinkhorn",
                  "refit", "sim", "metrics", "output_dir"}
EMD_METRICS = ("euclidean", "sqeuclidean")
SAMPLE_MODES = ("sde", "ode")


def _section(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(data) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}")


@dataclass
class SinkhornConfig:
    epsilon: float = 1.0
    max_iters: int = 10_000
    tol: float = 1e-8

    def __post_init__(self):
        if self.epsilon <= 0 or self.max_iters < 1 or self.tol <= 0:
            raise ConfigError("sinkhorn needs epsilon > 0, max_iters >= 1 and tol > 0")


@dataclass
class SimConfig:
    """Simulation and sampling settings."""

    dt: float = 1e-3
    n_per_snapshot: int = 100
    snapshot_times: Optional[Tuple[float, ...]] = None
    n_paths: int = 256
    steps: int = 100
    mode: str = "sde"
    gamma: float = 1.0

    def __post_init__(self):
        if self.snapshot_times is not None:
            self.snapshot_times = tuple(float(t) for t in self.snapshot_times)
        if self.dt <= 0 or self.n_per_snapshot < 1 or self.n_paths < 1 or self.steps < 1:
            raise ConfigError("sim needs dt > 0 and positive counts")
        if self.mode not in SAMPLE_MODES:
            raise ConfigError(f"sim.mode must be one of {SAMPLE_MODES}")
        if self.gamma < 0:
            raise ConfigError("sim.gamma must be >= 0")


@dataclass
class MetricsConfig:
    emd_metric: str = "euclidean"
    n_mc: int = 1024
    n_eval: int = 2000

    def __post_init__(self):
        if self.emd_metric not in EMD_METRICS:
            raise ConfigError(f"metrics.emd_metric must be one of {EMD_METRICS}")
        if self.n_mc < 2 or self.n_eval < 2:
            raise ConfigError("metrics sample counts must be >= 2")


@dataclass
class RunConfig:
    """A validated run configuration."""

    process: Optional[OUProcess] = None
    horizon: float = 1.0
    cache_nodes: int = DEFAULT_NODES
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    refit: RefitConfig = field(default_factory=RefitConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    output_dir: Optional[str] = None
    source: Dict[str, Any] = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base: Optional[Path] = None) -> "RunConfig":
        """
        Validate a config document.

        Args:
            data: Parsed JSON
            base: Directory that relative process paths resolve against

        Raises:
            ConfigError: On unknown keys or invalid values
        """
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - TOP_LEVEL_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        process = None
        if data.get("process") is not None:
            try:
                process = resolve_process(data["process"], base)
            except (DataError, InvalidArgumentError) as exc:
                raise ConfigError(f"process: {exc}")
        try:
            horizon = float(data.get("horizon", 1.0))
            cache_nodes = int(data.get("cache_nodes", DEFAULT_NODES))
            seed = int(data.get("seed", 0))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad scalar in config: {exc}")
        if horizon <= 0 or cache_nodes < 2 or seed < 0:
            raise ConfigError("need horizon > 0, cache_nodes >= 2, seed >= 0")

        sinkhorn = _section(SinkhornConfig, data.get("sinkhorn"), "sinkhorn")
        train_data = data.get("train") or {}
        if not isinstance(train_data, dict):
            raise ConfigError("train must be a JSON object")
        train_data = dict(train_data)
        train_data.setdefault("sinkhorn_epsilon", sinkhorn.epsilon)
        train_data.setdefault("sinkhorn_max_iters", sinkhorn.max_iters)
        train_data.setdefault("sinkhorn_tol", sinkhorn.tol)
        train_data.setdefault("cache_nodes", cache_nodes)
        train_data.setdefault("seed", seed)
        return cls(
            process=process,
            horizon=horizon,
            cache_nodes=cache_nodes,
            seed=seed,
            train=_section(TrainConfig, train_data, "train"),
            sinkhorn=sinkhorn,
            refit=_section(RefitConfig, data.get("refit"), "refit"),
            sim=_section(SimConfig, data.get("sim"), "sim"),
            metrics=_section(MetricsConfig, data.get("metrics"), "metrics"),
            output_dir=data.get("output_dir"),
            source=data,
        )

    def with_seed(self, seed: int) -> "RunConfig":
        """Override the seed everywhere it is used (command-line flag)."""
        return replace(self, seed=seed, train=replace(self.train, seed=seed))

    def require_process(self) -> OUProcess:
        if self.process is None:
            raise ConfigError("this command needs a reference process in the config")
        return self.process

    def canonical(self) -> Dict[str, Any]:
        """Resolved, JSON-ready form used for hashing."""
        return {
            "process": self.process.to_dict() if self.process is not None else None,
            "horizon": self.horizon,
            "cache_nodes": self.cache_nodes,
            "seed": self.seed,
            "train": self.train.to_dict(),
            "sinkhorn": {"epsilon": self.sinkhorn.epsilon, "max_iters": self.sinkhorn.max_iters,
                         "tol": self.sinkhorn.tol},
            "refit": {
                "outer_iters": self.refit.outer_iters,
                "lambda_grid": list(self.refit.lambda_grid),
                "folds": self.refit.folds,
                "sde_step": self.refit.sde_step,
                "held_out": list(self.refit.held_out) if self.refit.held_out is not None else None,
            },
            "sim": {
                "dt": self.sim.dt,
                "n_per_snapshot": self.sim.n_per_snapshot,
                "snapshot_times": list(self.sim.snapshot_times) if self.sim.snapshot_times else None,
                "n_paths": self.sim.n_paths,
                "steps": self.sim.steps,
                "mode": self.sim.mode,
                "gamma": self.sim.gamma,
            },
            "metrics": {"emd_metric": self.metrics.emd_metric, "n_mc": self.metrics.n_mc,
                        "n_eval": self.metrics.n_eval},
        }

    def config_hash(self) -> str:
        """SHA-256 of the canonical sorted-key JSON form."""
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_run_config(path: Optional[str | Path]) -> RunConfig:
    """
    Load and validate a config file; ``None`` gives the defaults.

    Raises:
        ConfigError: If the file is unreadable or invalid
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg} (line {exc.lineno})")
    return RunConfig.from_dict(data, base=path.parent)
