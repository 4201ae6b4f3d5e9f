from .checkpoint import (
    CHECKPOINT_VERSION,
    MAGIC,
    Checkpoint,
    ManifestEntry,
    checkpoint_from_trainer,
    load_checkpoint,
    restore_detector,
    restore_trainer,
    save_checkpoint,
)
from .detection_io import load_detections, save_detections
from .jsonl import read_jsonl, write_jsonl
from .scene_io import load_scenes, save_scenes

__all__ = [
    "CHECKPOINT_VERSION",
    "Checkpoint",
    "MAGIC",
    "ManifestEntry",
    "checkpoint_from_trainer",
    "load_checkpoint",
    "load_detections",
    "load_scenes",
    "read_jsonl",
    "restore_detector",
    "restore_trainer",
    "save_checkpoint",
    "save_detections",
    "save_scenes",
    "write_jsonl",
]
