"""
Environment configuration.
Loads environment variables from a .env file in the project root.
"""

import os
from pathlib import Path
from typing import Optional

try:
    from dotenv import load_dotenv
except ImportError:
    load_dotenv = None

from .errors import ConfigError

THREADS_ENV = "OUSB_THREADS"
LOG_LEVEL_ENV = "OUSB_LOG_LEVEL"


def load_env_file(env_path: Optional[str | Path] = None) -> None:
    """
    Load environment variables from .env file.

    Args:
        env_path: Path to .env file. If None, looks for .env in project root.
    """
    if load_dotenv is None:
        # python-dotenv not installed, skip loading
        return

    if env_path is None:
        project_root = Path(__file__).resolve().parent.parent  # app -> project_root
        env_path = project_root / ".env"
    else:
        env_path = Path(env_path)

    if env_path.exists():
        load_dotenv(dotenv_path=env_path, override=False)


def get_default_threads() -> int:
    """
    Default worker count for parallel sections.

    Returns:
        Value of OUSB_THREADS, or 1 when unset

    Raises:
        ConfigError: If the variable is not a positive integer
    """
    raw = os.getenv(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return 1
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {threads}")
    return threads


def get_log_level() -> str:
    """Log level from OUSB_LOG_LEVEL (default INFO)."""
    level = os.getenv(LOG_LEVEL_ENV, "INFO").upper()
    if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
        raise ConfigError(f"{LOG_LEVEL_ENV} has unknown level {level!r}")
    return level


# Load .env file when module is imported
load_env_file()
