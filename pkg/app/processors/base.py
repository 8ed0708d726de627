"""
Base processor class for the input file readers.

This provides a common interface for reading snapshot tables and JSON documents.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Iterator

from ..errors import DataError


class BaseProcessor(ABC):
    """
    Abstract base class for all input processors.

    All processors should inherit from this class and implement
    the required methods for reading and validating their file type.
    """

    def __init__(self, file_path: str | Path):
        """
        Initialize the processor with a file path.

        Args:
            file_path: Path to the input file

        Raises:
            DataError: If the file does not exist
        """
        self.file_path = Path(file_path)
        if not self.file_path.is_file():
            raise DataError(f"File not found: {self.file_path}")

    @abstractmethod
    def read(self, **kwargs) -> Any:
        """
        Read and validate the whole file.

        Returns:
            The content in its native form (DataFrame or dict)
        """
        pass

    @abstractmethod
    def read_chunks(self, chunk_size: int = 1000, **kwargs) -> Iterator[Any]:
        """
        Read the file in chunks.

        Args:
            chunk_size: Number of records per chunk

        Yields:
            Chunks of the content
        """
        pass

    @abstractmethod
    def get_metadata(self) -> Dict[str, Any]:
        """
        Get metadata about the file.

        Returns:
            Dictionary containing metadata (e.g., row count, columns, file size)
        """
        pass

    def get_file_size(self) -> int:
        """Get the file size in bytes."""
        return self.file_path.stat().st_size

    def get_file_extension(self) -> str:
        """Get the file extension."""
        return self.file_path.suffix.lower()
