from pathlib import Path

from loguru import logger

from ..domain import Scene
from ..domain.scene import SCENE_SCHEMA_VERSION
from .jsonl import read_jsonl, write_jsonl


def save_scenes(path: Path, scenes: list[Scene]) -> None:
    count = write_jsonl(path, scenes)
    logger.info(f"Wrote {count} scenes to {path}")


def load_scenes(path: Path) -> list[Scene]:
    """Read a scene JSONL file.

    Raises:
        DataError: On a malformed line (named by number) or a schema version mismatch.
    """
    scenes = read_jsonl(path, Scene, SCENE_SCHEMA_VERSION)
    logger.debug(f"Loaded {len(scenes)} scenes from {path}")
    return scenes
