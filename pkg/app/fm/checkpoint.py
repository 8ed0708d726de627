"""
Trained flow/score networks with their reference process.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from ..core.process import OUProcess
from ..errors import DataError, InvalidArgumentError
from .networks import FeedForwardNet


@dataclass
class Checkpoint:
    """
    Attributes:
        flow_net: u_θ
        score_net: s_φ
        process: Reference the networks were trained against
        meta: Training metadata; ``time_origin`` and ``time_span`` map global time to the
            network input (t - origin) / span
    """

    flow_net: FeedForwardNet
    score_net: FeedForwardNet
    process: OUProcess
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def arch(self) -> List[int]:
        return list(self.flow_net.widths)

    def net_time(self, t) -> np.ndarray:
        origin = float(self.meta.get("time_origin", 0.0))
        span = float(self.meta.get("time_span", 1.0))
        return (np.asarray(t, dtype=float) - origin) / span

    def flow(self, t, X: np.ndarray) -> np.ndarray:
        return self.flow_net.forward(self.net_time(t), X)

    def score(self, t, X: np.ndarray) -> np.ndarray:
        return self.score_net.forward(self.net_time(t), X)

    def drift(self, t, X: np.ndarray) -> np.ndarray:
        """Schrödinger bridge drift u_θ + D s_φ."""
        return self.flow(t, X) + self.score(t, X) @ self.process.diffusivity.T

    def to_dict(self) -> Dict[str, Any]:
        return {
            "arch": self.arch,
            "u": self.flow_net.to_dict(),
            "s": self.score_net.to_dict(),
            "process": self.process.to_dict(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Checkpoint":
        if not isinstance(data, dict) or set(data) != {"arch", "u", "s", "process", "meta"}:
            raise DataError("checkpoint must have exactly the keys arch, u, s, process, meta")
        try:
            flow_net = FeedForwardNet.from_dict(data["arch"], data["u"])
            score_net = FeedForwardNet.from_dict(data["arch"], data["s"])
            process = OUProcess.from_dict(data["process"])
        except (InvalidArgumentError, KeyError, TypeError, ValueError) as exc:
            raise DataError(f"invalid checkpoint: {exc}")
        return cls(flow_net, score_net, process, dict(data["meta"]))

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def sb_drift(checkpoint: Checkpoint, t, x: np.ndarray) -> np.ndarray:
    """v(t, x) = u_θ(t, x) + D s_φ(t, x) with t in global time."""
    return checkpoint.drift(t, x)
