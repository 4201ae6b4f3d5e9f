# What it is: the checkpoint file format.
#   bytes 0..8    magic b"SIMPBCK1"
#   bytes 8..16   header length n, unsigned little-endian
#   bytes 16..16+n  UTF-8 JSON header: version, config snapshot, step, loss history and a
#                   manifest of {name, shape, offset}; offsets are byte offsets into the payload
#   rest          every tensor as little-endian float64, C order, in manifest order
# Parameters and optimizer moments ("adam.m.<name>", "adam.v.<name>") share the manifest.

import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..application.model import AdamW, SimPBDetector, Trainer
from ..domain import RunConfig, Scene
from ..exceptions import DataError

MAGIC = b"SIMPBCK1"
CHECKPOINT_VERSION = 1
ITEM_SIZE = 8
_LENGTH = struct.Struct("<Q")


class ManifestEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    shape: list[int]
    offset: int = Field(ge=0)

    @property
    def nbytes(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) * ITEM_SIZE


class CheckpointHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    version: int = CHECKPOINT_VERSION
    config: dict
    step: int = Field(default=0, ge=0)
    loss_history: list[float] = Field(default_factory=list)
    manifest: list[ManifestEntry] = Field(default_factory=list)


@dataclass
class Checkpoint:
    """Decoded checkpoint: header fields plus name -> float64 array."""

    config: dict
    step: int = 0
    loss_history: list[float] = field(default_factory=list)
    tensors: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)

    def parameters(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, v) for k, v in self.tensors.items() if not k.startswith("adam."))

    def optimizer_state(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k.startswith("adam.")}


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> None:
    """Write `checkpoint`; load_checkpoint(path) reproduces every array bit for bit."""

    manifest, chunks, offset = [], [], 0
    for name, values in checkpoint.tensors.items():
        data = np.ascontiguousarray(np.asarray(values, dtype="<f8"))
        manifest.append(ManifestEntry(name=name, shape=list(data.shape), offset=offset))
        chunks.append(data.tobytes(order="C"))
        offset += data.nbytes
    header = CheckpointHeader(
        config=checkpoint.config,
        step=checkpoint.step,
        loss_history=checkpoint.loss_history,
        manifest=manifest,
    )
    encoded = header.model_dump_json().encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_LENGTH.pack(len(encoded)))
        f.write(encoded)
        for chunk in chunks:
            f.write(chunk)
    logger.info(f"Wrote checkpoint at step {checkpoint.step} ({len(manifest)} tensors, {offset} payload bytes) to {path}")


def _check_manifest(manifest: list[ManifestEntry], payload_size: int, path: Path) -> None:
    end = 0
    for entry in sorted(manifest, key=lambda e: e.offset):
        if any(dim < 0 for dim in entry.shape):
            raise DataError(f"{path}: tensor {entry.name!r} has a negative dimension")
        if entry.offset < end:
            raise DataError(f"{path}: tensor {entry.name!r} overlaps the previous tensor")
        end = entry.offset + entry.nbytes
        if end > payload_size:
            raise DataError(f"{path}: tensor {entry.name!r} runs past the end of the payload")
    names = [entry.name for entry in manifest]
    if len(set(names)) != len(names):
        raise DataError(f"{path}: duplicate tensor names in the manifest")


def load_checkpoint(path: Path) -> Checkpoint:
    """Read a checkpoint written by `save_checkpoint`.

    Raises:
        DataError: Missing file, wrong magic, unsupported version, a malformed header or a
            manifest whose entries overlap or fall outside the payload.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read checkpoint {path}: {e}") from e
    if raw[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path} is not a checkpoint (bad magic)")
    start = len(MAGIC) + _LENGTH.size
    if len(raw) < start:
        raise DataError(f"{path}: truncated header")
    (length,) = _LENGTH.unpack_from(raw, len(MAGIC))
    if len(raw) < start + length:
        raise DataError(f"{path}: truncated header")
    try:
        data = json.loads(raw[start : start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: malformed header: {e}") from e
    if not isinstance(data, dict) or data.get("version") != CHECKPOINT_VERSION:
        version = data.get("version") if isinstance(data, dict) else None
        raise DataError(f"{path}: checkpoint version {version!r} is not supported (expected {CHECKPOINT_VERSION})")
    try:
        header = CheckpointHeader.model_validate(data)
    except ValidationError as e:
        raise DataError(f"{path}: invalid checkpoint header: {e}") from e

    payload = memoryview(raw)[start + length :]
    _check_manifest(header.manifest, len(payload), path)
    tensors = OrderedDict()
    for entry in header.manifest:
        count = entry.nbytes // ITEM_SIZE
        values = np.frombuffer(payload, dtype="<f8", count=count, offset=entry.offset)
        tensors[entry.name] = values.astype(np.float64).reshape(entry.shape)
    return Checkpoint(config=header.config, step=header.step, loss_history=header.loss_history, tensors=tensors)


def checkpoint_from_trainer(trainer: Trainer) -> Checkpoint:
    tensors = OrderedDict(trainer.detector.store.state_dict())
    tensors.update(trainer.optimizer.state_dict())
    return Checkpoint(
        config=trainer.run.to_dict(),
        step=trainer.step,
        loss_history=list(trainer.loss_history),
        tensors=tensors,
    )


def restore_detector(checkpoint: Checkpoint) -> SimPBDetector:
    """Detector with the checkpoint's config and parameters (optimizer state ignored)."""

    detector = SimPBDetector(RunConfig.from_dict(checkpoint.config))
    try:
        detector.store.load_state_dict(checkpoint.parameters())
    except Exception as e:
        logger.exception("Checkpoint parameters do not fit the configured model")
        raise DataError(f"checkpoint does not match its own config: {e}") from e
    return detector


def restore_trainer(checkpoint: Checkpoint, scenes: list[Scene], output_dir: Path | None = None) -> Trainer:
    """Trainer positioned exactly where the checkpointed run stopped."""

    detector = restore_detector(checkpoint)
    optimizer = AdamW(detector.store, detector.config)
    try:
        optimizer.load_state_dict(checkpoint.optimizer_state(), checkpoint.step)
    except Exception as e:
        logger.exception("Checkpoint optimizer state does not fit the model")
        raise DataError(f"checkpoint optimizer state is inconsistent: {e}") from e
    trainer = Trainer(detector.run, scenes, detector, optimizer, output_dir)
    trainer.step = checkpoint.step
    trainer.loss_history = list(checkpoint.loss_history)
    return trainer
