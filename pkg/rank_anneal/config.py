import json
import logging
import os
import tomllib
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from rank_anneal.errors import ConfigError

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
DEFAULT_STORE_DIR = ".rank-anneal/runs"


class ConfigManager:
    """Manages application configuration and environment variables."""

    def __init__(self):
        load_dotenv()
        self._log_level = os.getenv("RANK_ANNEAL_LOG_LEVEL") or "INFO"
        self._workers = _positive_int("RANK_ANNEAL_WORKERS", os.getenv("RANK_ANNEAL_WORKERS") or "1")
        self._store_dir = os.getenv("RANK_ANNEAL_STORE_DIR") or DEFAULT_STORE_DIR
        self._cache_file = os.getenv("RANK_ANNEAL_CACHE_FILE") or None
        self._data_dir = os.getenv("RANK_ANNEAL_DATA_DIR") or None
        cache_size = os.getenv("RANK_ANNEAL_CACHE_SIZE")
        self._cache_size = _positive_int("RANK_ANNEAL_CACHE_SIZE", cache_size) if cache_size else None

    @property
    def log_level(self) -> str:
        """Get logging level name from environment variables."""
        return self._log_level

    @property
    def workers(self) -> int:
        """Get worker pool size for sweeps and beam steps."""
        return self._workers

    @property
    def store_dir(self) -> str:
        """Get directory holding persisted run records."""
        return self._store_dir

    @property
    def cache_file(self) -> Optional[str]:
        """Get evaluator cache persistence file, if any."""
        return self._cache_file

    @property
    def data_dir(self) -> Optional[str]:
        """Get the dataset fold directory served by the results service."""
        return self._data_dir

    @property
    def cache_size(self) -> Optional[int]:
        """Get evaluator cache entry cap; None means unbounded."""
        return self._cache_size


def _positive_int(name: str, raw: str) -> int:
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def load_config_file(path: str | Path) -> Dict[str, Any]:
    """Load a flat JSON or TOML config file into a dictionary.

    Args:
        path: File ending in .json or .toml

    Returns:
        Dictionary of option name to value, keys normalized to snake_case

    Raises:
        ConfigError: unreadable file, unknown extension or malformed content
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")

    try:
        if path.suffix == ".json":
            values = json.loads(raw.decode("utf-8"))
        elif path.suffix == ".toml":
            values = tomllib.loads(raw.decode("utf-8"))
        else:
            raise ConfigError(f"config file must be .json or .toml: {path}")
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"malformed config file {path}: {e}")

    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a table of options")
    return {key.replace("-", "_"): value for key, value in values.items()}


def configure_logging(level: str = "INFO") -> None:
    """Install a single stream handler on the root logger."""
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ConfigError(f"unknown log level {level!r}")
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(numeric)


ModelT = TypeVar("ModelT", bound=BaseModel)


def build_model(model_cls: Type[ModelT], values: Dict[str, Any]) -> ModelT:
    """Validate ``values`` into ``model_cls``, reporting failures as ConfigError."""
    try:
        return model_cls.model_validate(values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or model_cls.__name__}: {error['msg']}"
            for error in e.errors()
        )
        raise ConfigError(f"invalid {model_cls.__name__}: {problems}") from e
