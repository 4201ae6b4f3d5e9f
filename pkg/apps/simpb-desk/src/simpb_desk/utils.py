import hashlib
import math
import sys
from pathlib import Path

import numpy as np
from loguru import logger


def configure_logging(level: str = "INFO") -> None:
    """Replace loguru's default sink with a single stderr sink at `level`."""

    logger.remove()
    logger.add(
        sys.stderr,
        level=level.upper(),
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {name}:{line} - {message}",
    )


def make_rng(seed: int) -> np.random.Generator:
    """Create the numpy generator every seeded routine in the package draws from.

    Args:
        seed: Non-negative integer seed.

    Returns:
        np.random.Generator: PCG64 generator seeded with `seed`.
    """
    return np.random.default_rng(seed)


def wrap_angle(angle: float) -> float:
    """Wrap an angle in radians into (-pi, pi]."""

    wrapped = math.remainder(angle, 2.0 * math.pi)  # lands in [-pi, pi]
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def wrap_angles(angles: np.ndarray) -> np.ndarray:
    """Vectorised `wrap_angle`."""

    wrapped = np.remainder(angles + np.pi, 2.0 * np.pi) - np.pi
    return np.where(wrapped <= -np.pi, wrapped + 2.0 * np.pi, wrapped)


def sha256_file(path: Path) -> str:
    """Hex digest of a file's bytes (used to check generated files are stable)."""

    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
