"""
Input processors for snapshot tables and JSON documents.
"""

from .base import BaseProcessor
from .csv_processor import SnapshotCSVProcessor, check_header, snapshot_columns
from .json_processor import JSONDocumentProcessor, read_process, resolve_process
from .factory import ProcessorFactory, get_processor, read_snapshot_files

__all__ = [
    'BaseProcessor',
    'SnapshotCSVProcessor',
    'JSONDocumentProcessor',
    'ProcessorFactory',
    'get_processor',
    'read_snapshot_files',
    'read_process',
    'resolve_process',
    'check_header',
    'snapshot_columns',
]
