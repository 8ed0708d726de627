"""
JSON document processor for process, problem, checkpoint and config files.
"""

import json
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple

from ..core.process import Gaussian, OUProcess
from ..errors import DataError, InvalidArgumentError
from ..fm.checkpoint import Checkpoint
from .base import BaseProcessor

PROBLEM_KEYS = {"process", "rho0", "rhoT", "T", "grid"}


class JSONDocumentProcessor(BaseProcessor):
    """Processor for JSON documents."""

    def read(self, **kwargs) -> Dict[str, Any]:
        """
        Read the JSON object.

        Raises:
            DataError: If the file is not valid JSON or not an object
        """
        encoding = kwargs.pop("encoding", "utf-8")
        try:
            with open(self.file_path, "r", encoding=encoding) as f:
                data = json.load(f, **kwargs)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON in {self.file_path}: {exc.msg}", row=exc.lineno)
        if not isinstance(data, dict):
            raise DataError(f"{self.file_path} must hold a JSON object")
        return data

    def read_chunks(self, chunk_size: int = 1000, **kwargs) -> Iterator[Dict[str, Any]]:
        # Documents are small; yield the whole object
        yield self.read(**kwargs)

    def read_process(self) -> OUProcess:
        """Parse an OU process document {dim, A, m, sigma}."""
        try:
            return OUProcess.from_dict(self.read())
        except InvalidArgumentError as exc:
            raise DataError(f"{self.file_path}: {exc}")

    def read_problem(self) -> Tuple[OUProcess, Gaussian, Gaussian, float, int]:
        """
        Parse a Gaussian bridge problem {process, rho0, rhoT, T, grid}.

        ``process`` may be inline or a path relative to the document.

        Returns:
            (process, rho0, rhoT, horizon, grid points)
        """
        data = self.read()
        missing = PROBLEM_KEYS - set(data)
        unknown = set(data) - PROBLEM_KEYS
        if missing or unknown:
            raise DataError(f"problem keys: missing {sorted(missing)}, unknown {sorted(unknown)}")
        try:
            process = self._resolve_process(data["process"])
            rho0 = Gaussian.from_dict(data["rho0"], "rho0")
            rhoT = Gaussian.from_dict(data["rhoT"], "rhoT")
        except InvalidArgumentError as exc:
            raise DataError(f"{self.file_path}: {exc}")
        horizon = float(data["T"])
        grid = int(data["grid"])
        if horizon <= 0 or grid < 2:
            raise DataError("problem needs T > 0 and grid >= 2")
        return process, rho0, rhoT, horizon, grid

    def read_checkpoint(self) -> Checkpoint:
        """Parse a trained bridge checkpoint."""
        return Checkpoint.from_dict(self.read())

    def _resolve_process(self, value: Any) -> OUProcess:
        if isinstance(value, str):
            return JSONDocumentProcessor(self.file_path.parent / value).read_process()
        return OUProcess.from_dict(value)

    def get_metadata(self) -> Dict[str, Any]:
        data = self.read()
        return {
            "keys": sorted(data),
            "file_size": self.get_file_size(),
            "file_path": str(self.file_path),
        }


def read_process(path: str | Path) -> OUProcess:
    return JSONDocumentProcessor(path).read_process()


def resolve_process(value: Any, base: Optional[Path] = None) -> OUProcess:
    """A process given inline or as a path (relative to ``base``)."""
    if isinstance(value, (str, Path)):
        path = Path(value)
        if base is not None and not path.is_absolute():
            path = base / path
        return read_process(path)
    try:
        return OUProcess.from_dict(value)
    except InvalidArgumentError as exc:
        raise DataError(f"invalid process: {exc}")
