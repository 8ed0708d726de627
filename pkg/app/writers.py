"""
Artifact writers: atomic CSV/JSON output and the per-run manifest.
"""

import json
import logging
import os
import tempfile
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .processors.csv_processor import snapshot_columns
from .sim.generators import Snapshot

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
MANIFEST_NAME = "manifest.json"
TRACKED_PACKAGES = ("numpy", "scipy", "pandas", "scikit-learn", "POT", "rich")


def _atomic(path: Path, write: Callable[[Any], None]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            write(handle)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_json(path: str | Path, data: Any) -> Path:
    """Write ``data`` as indented JSON; floats keep their round-trip repr."""
    path = Path(path)
    _atomic(path, lambda h: h.write(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n"))
    return path


def write_frame(path: str | Path, frame: pd.DataFrame) -> Path:
    """Write a DataFrame as CSV with 17 significant digits."""
    path = Path(path)
    _atomic(path, lambda h: frame.to_csv(h, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))
    return path


def snapshot_frame(snapshots: Sequence[Snapshot]) -> pd.DataFrame:
    """Long table ``t,x1..xd`` with one row per sample."""
    dim = snapshots[0].dim
    rows = [np.column_stack([np.full(s.size, s.time), s.samples]) for s in snapshots]
    return pd.DataFrame(np.vstack(rows), columns=snapshot_columns(dim))


def write_snapshots(path: str | Path, snapshots: Sequence[Snapshot]) -> Path:
    return write_frame(path, snapshot_frame(snapshots))


def write_trajectories(path: str | Path, times: np.ndarray, states: np.ndarray) -> Path:
    """
    Write saved states (len(times), n, d) as ``t,path,x1..xd`` rows.
    """
    times = np.asarray(times, dtype=float)
    n_times, n_paths, dim = states.shape
    t_col = np.repeat(times, n_paths)
    p_col = np.tile(np.arange(n_paths), n_times)
    frame = pd.DataFrame(states.reshape(-1, dim), columns=snapshot_columns(dim)[1:])
    frame.insert(0, "path", p_col)
    frame.insert(0, "t", t_col)
    return write_frame(path, frame)


def matrix_columns(prefix: str, dim: int) -> List[str]:
    return [f"{prefix}_{i}{j}" for i in range(1, dim + 1) for j in range(1, dim + 1)]


def vector_columns(prefix: str, dim: int) -> List[str]:
    return [f"{prefix}_{i}" for i in range(1, dim + 1)]


def write_marginals(path: str | Path, times: Sequence[float], means: Sequence[np.ndarray],
                    covs: Sequence[np.ndarray]) -> Path:
    """Columns t, nu_1..nu_d, Xi_11..Xi_dd (row-major)."""
    dim = len(means[0])
    data = np.column_stack([np.asarray(times, dtype=float), np.asarray(means),
                            np.asarray(covs).reshape(len(times), -1)])
    columns = ["t"] + vector_columns("nu", dim) + matrix_columns("Xi", dim)
    return write_frame(path, pd.DataFrame(data, columns=columns))


def write_drift_matrices(path: str | Path, times: Sequence[float], gains: Sequence[np.ndarray],
                         rates: Sequence[np.ndarray]) -> Path:
    """Columns t, K_11..K_dd, nu_dot_1..nu_dot_d."""
    dim = len(rates[0])
    data = np.column_stack([np.asarray(times, dtype=float), np.asarray(gains).reshape(len(times), -1),
                            np.asarray(rates)])
    columns = ["t"] + matrix_columns("K", dim) + vector_columns("nu_dot", dim)
    return write_frame(path, pd.DataFrame(data, columns=columns))


def write_plan(path: str | Path, plan: np.ndarray, threshold: float = 1e-12) -> Path:
    """Sparse triplets i, j, mass for entries above ``threshold``."""
    rows, cols = np.nonzero(plan > threshold)
    frame = pd.DataFrame({"i": rows, "j": cols, "mass": plan[rows, cols]})
    return write_frame(path, frame)


def package_versions() -> Dict[str, str]:
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


@dataclass
class RunManifest:
    """Record of one command run; written last into the output directory."""

    command: str
    config_hash: str
    seed: int
    artifacts: List[str] = field(default_factory=list)
    versions: Dict[str, str] = field(default_factory=package_versions)
    started: float = field(default_factory=time.perf_counter)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "versions": self.versions,
            "wall_time": time.perf_counter() - self.started,
            "artifacts": sorted(self.artifacts),
        }


class ArtifactWriter:
    """
    Writes a run's artifacts into one directory and tracks them for the manifest.

    Args:
        out_dir: Output directory (created on first write)
        manifest: Manifest to fill
    """

    def __init__(self, out_dir: str | Path, manifest: RunManifest):
        self.out_dir = Path(out_dir)
        self.manifest = manifest

    def _track(self, path: Path) -> Path:
        name = path.relative_to(self.out_dir).as_posix()
        if name not in self.manifest.artifacts:
            self.manifest.artifacts.append(name)
        logger.debug("wrote %s", path)
        return path

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def json(self, name: str, data: Any) -> Path:
        return self._track(write_json(self.path(name), data))

    def frame(self, name: str, frame: pd.DataFrame) -> Path:
        return self._track(write_frame(self.path(name), frame))

    def snapshots(self, name: str, snapshots: Sequence[Snapshot]) -> Path:
        return self._track(write_snapshots(self.path(name), snapshots))

    def trajectories(self, name: str, times: np.ndarray, states: np.ndarray) -> Path:
        return self._track(write_trajectories(self.path(name), times, states))

    def marginals(self, name: str, times, means, covs) -> Path:
        return self._track(write_marginals(self.path(name), times, means, covs))

    def drift_matrices(self, name: str, times, gains, rates) -> Path:
        return self._track(write_drift_matrices(self.path(name), times, gains, rates))

    def plan(self, name: str, plan: np.ndarray) -> Path:
        return self._track(write_plan(self.path(name), plan))

    def finish(self) -> Path:
        """Write ``manifest.json``; call once after all artifacts."""
        return write_json(self.path(MANIFEST_NAME), self.manifest.to_dict())


def read_manifest(out_dir: str | Path) -> Optional[Dict[str, Any]]:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.exists():
        return None
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
