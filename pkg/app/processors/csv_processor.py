"""
Snapshot CSV processor.

Schema: header ``t,x1,...,xd``; one row per sample; snapshots are told
apart by distinct values of ``t``.
"""

import re
from pathlib import Path
from typing import Any, Dict, Iterator, List

import numpy as np
import pandas as pd

from ..errors import DataError
from ..sim.generators import Snapshot
from .base import BaseProcessor

_STATE_COLUMN = re.compile(r"^x(\d+)$")
_RAGGED = re.compile(r"Expected (\d+) fields in line (\d+), saw (\d+)")


def snapshot_columns(dim: int) -> List[str]:
    """Header for a d-dimensional snapshot table."""
    return ["t"] + [f"x{i}" for i in range(1, dim + 1)]


def check_header(columns: List[str]) -> int:
    """
    Validate a snapshot header and return the state dimension.

    Raises:
        DataError: Naming missing or unexpected columns
    """
    states = []
    unexpected = []
    for name in columns:
        if name == "t":
            continue
        match = _STATE_COLUMN.match(name)
        if match:
            states.append(int(match.group(1)))
        else:
            unexpected.append(name)
    dim = max(states, default=0)
    missing = [c for c in snapshot_columns(max(dim, 1)) if c not in columns]
    if missing:
        raise DataError(f"missing columns: {', '.join(missing)}")
    if unexpected:
        raise DataError(f"unexpected columns: {', '.join(unexpected)}")
    if len(columns) != dim + 1:
        raise DataError("duplicate columns in header")
    return dim


def _exact_float(cell: str) -> float:
    # float() rounds correctly; 17-digit cells read back exactly
    try:
        return float(cell)
    except ValueError:
        return np.nan


class SnapshotCSVProcessor(BaseProcessor):
    """Processor for snapshot CSV files."""

    def _parse(self, frame: pd.DataFrame, row_offset: int = 0) -> pd.DataFrame:
        for column in frame.columns:
            raw = frame[column]
            if raw.isna().any():
                row = int(np.flatnonzero(raw.isna().to_numpy())[0]) + 1 + row_offset
                raise DataError("ragged row: too few fields", row=row, column=column)
            values = raw.str.strip().map(_exact_float)
            bad = ~np.isfinite(values.to_numpy(dtype=float))
            if bad.any():
                index = int(np.flatnonzero(bad)[0])
                raise DataError(f"non-numeric cell {raw.iloc[index]!r}", row=index + 1 + row_offset, column=column)
            frame[column] = values.astype(float)
        return frame

    def _reader(self, **kwargs):
        try:
            return pd.read_csv(self.file_path, dtype=str, na_filter=False, skipinitialspace=True, **kwargs)
        except pd.errors.EmptyDataError:
            raise DataError(f"empty snapshot file: {self.file_path}")
        except pd.errors.ParserError as exc:
            raise _ragged_error(exc)

    def read(self, **kwargs) -> pd.DataFrame:
        """
        Read and validate the CSV into a float DataFrame.

        Raises:
            DataError: On missing columns, ragged rows or non-numeric cells
        """
        frame = self._reader(**kwargs)
        check_header(list(frame.columns))
        if frame.empty:
            raise DataError(f"no samples in {self.file_path}")
        try:
            return self._parse(frame)
        except pd.errors.ParserError as exc:
            raise _ragged_error(exc)

    def read_chunks(self, chunk_size: int = 1000, **kwargs) -> Iterator[pd.DataFrame]:
        """
        Read the CSV in validated chunks.

        Yields:
            Float DataFrames of at most ``chunk_size`` rows
        """
        offset = 0
        try:
            for chunk in self._reader(chunksize=chunk_size, **kwargs):
                check_header(list(chunk.columns))
                yield self._parse(chunk, row_offset=offset)
                offset += len(chunk)
        except pd.errors.ParserError as exc:
            raise _ragged_error(exc)

    def read_snapshots(self) -> List[Snapshot]:
        """
        Group rows by time into snapshots sorted by time.

        Returns:
            List of Snapshot, one per distinct t
        """
        frame = self.read()
        states = frame.columns[1:]
        snapshots = []
        for time, group in frame.groupby("t", sort=True):
            snapshots.append(Snapshot(float(time), group[states].to_numpy(dtype=float)))
        return snapshots

    def get_metadata(self) -> Dict[str, Any]:
        """
        Get metadata about the snapshot file.

        Returns:
            Dictionary with row_count, dim, times, counts per time and file size
        """
        frame = self.read()
        counts = frame.groupby("t", sort=True).size()
        return {
            "row_count": len(frame),
            "dim": len(frame.columns) - 1,
            "times": [float(t) for t in counts.index],
            "counts": [int(c) for c in counts.to_numpy()],
            "file_size": self.get_file_size(),
            "file_path": str(self.file_path),
        }


def _ragged_error(exc: Exception) -> DataError:
    match = _RAGGED.search(str(exc))
    if match:
        # pandas counts the header as line 1
        return DataError(
            f"ragged row: expected {match.group(1)} fields, saw {match.group(3)}",
            row=int(match.group(2)) - 1,
        )
    return DataError(f"malformed CSV: {exc}")
