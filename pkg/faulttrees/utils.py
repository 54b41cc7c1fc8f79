"""
Utility functions shared by the fault-tree modules: timing, deterministic
hashing and file output helpers.
"""
from typing import Dict, Iterable
import hashlib
import json
import logging
import platform
import time
from pathlib import Path

logger = logging.getLogger(__name__)

_HASH_SCALE = float(2 ** 64)


def stable_hash(seed: int, tag: str, parts: Iterable[int] = ()) -> int:
    """
    Hash a seed, a tag and a sequence of integers to a 64-bit integer.

    The value depends only on the arguments, never on call order or
    process state, so lazily sampled structures replay identically.

    Args:
        seed: Experiment seed
        tag: Name of the random choice being made
        parts: Node path or other integer coordinates

    Returns:
        Unsigned 64-bit integer
    """
    digest = hashlib.blake2b(digest_size=8)
    digest.update(f"{int(seed)}|{tag}|".encode())
    digest.update(','.join(str(int(p)) for p in parts).encode())
    return int.from_bytes(digest.digest(), 'big')


def stable_uniform(seed: int, tag: str, parts: Iterable[int] = ()) -> float:
    """Uniform draw in [0, 1) derived from :func:`stable_hash`."""
    return stable_hash(seed, tag, parts) / _HASH_SCALE


def format_duration(duration_seconds: float) -> str:
    """
    Format duration for human-readable display.

    Args:
        duration_seconds: Duration in seconds

    Returns:
        Formatted string (e.g., "2m 05s" or "3.21s")
    """
    if duration_seconds >= 60:
        minutes = int(duration_seconds // 60)
        seconds = int(duration_seconds % 60)
        return f"{minutes}m {seconds:02d}s"
    return f"{duration_seconds:.2f}s"


def write_json(path: Path, payload: Dict) -> Path:
    """
    Write a JSON document deterministically (sorted keys, fixed indent).

    Args:
        path: Destination file
        payload: JSON-serializable mapping

    Returns:
        The path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write('\n')
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: Path) -> Dict:
    """Read a JSON document."""
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def library_versions() -> Dict[str, str]:
    """Versions of the interpreter and numeric stack, recorded in manifests."""
    import django
    import networkx
    import numpy
    import pandas
    import scipy
    from django.conf import settings

    return {
        'python': platform.python_version(),
        'django': django.get_version(),
        'numpy': numpy.__version__,
        'scipy': scipy.__version__,
        'networkx': networkx.__version__,
        'pandas': pandas.__version__,
        'kfault_lab': getattr(settings, 'KFAULT_VERSION', 'unknown'),
    }


class PerformanceTimer:
    """
    Context manager that logs how long a step of an experiment took.

    Starts are logged at DEBUG and completions at ``log_level``. Failures
    are logged as errors and re-raised.
    """

    def __init__(self, name: str, log_level: int = logging.INFO):
        self.name = name
        self.log_level = log_level
        self.duration = None
        self._start = None

    def __enter__(self):
        self._start = time.perf_counter()
        logger.debug(f"{self.name} started")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.duration = time.perf_counter() - self._start
        if exc_type is None:
            logger.log(self.log_level, f"{self.name} completed in {self.duration:.3f}s")
        else:
            logger.error(f"{self.name} failed after {self.duration:.3f}s: {exc_val}")
        return False
