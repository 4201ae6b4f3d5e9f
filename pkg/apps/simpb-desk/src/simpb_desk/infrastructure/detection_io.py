from pathlib import Path

from loguru import logger

from ..domain import DetectionRecord
from ..domain.detection import DETECTION_SCHEMA_VERSION
from .jsonl import read_jsonl, write_jsonl


def save_detections(path: Path, records: list[DetectionRecord]) -> None:
    count = write_jsonl(path, records)
    logger.info(f"Wrote detections for {count} scenes to {path}")


def load_detections(path: Path) -> list[DetectionRecord]:
    return read_jsonl(path, DetectionRecord, DETECTION_SCHEMA_VERSION)
