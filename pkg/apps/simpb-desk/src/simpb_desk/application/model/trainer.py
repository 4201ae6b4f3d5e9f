# What it is: the training loop.
# A step takes a fixed batch of scenes (chosen by cycling through the training set, so
# the batch at step k never depends on anything but k), runs every forward on one tape,
# averages the losses, back-propagates and applies one AdamW update. Nothing in a step
# draws random numbers, which is what makes `--resume` reproduce an uninterrupted run.

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import psutil
from loguru import logger

from ...domain import RunConfig, Scene
from ...exceptions import DataError
from ..synthetic import rasterize_scene
from ..tensor import Tape, Tensor, ops
from .detector import SimPBDetector, follows
from .losses import compute_losses
from .optimizer import AdamW
from .temporal import TemporalMemory


class NonFiniteLossError(DataError):
    """Training produced a NaN / inf loss or gradient; carries the diagnostics."""

    def __init__(self, message: str, diagnostics: dict) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class TrainingSample:
    scene: Scene
    rasters: list[Tensor]
    memory: TemporalMemory | None = None


@dataclass(frozen=True)
class StepResult:
    step: int
    loss: float
    grad_norm: float
    components: dict[str, float] = field(default_factory=dict)


def train_step(detector: SimPBDetector, optimizer: AdamW, batch: list[TrainingSample], step: int = 0) -> StepResult:
    """forward -> losses -> backward -> AdamW update on one batch.

    Raises:
        NonFiniteLossError: If the loss or the gradient norm is not finite. Parameters
            are left untouched in that case.
    """
    config = detector.config
    detector.store.zero_grad()
    components: dict[str, float] = {}
    with Tape() as tape:
        total = Tensor(0.0)
        for sample in batch:
            state = detector.forward(sample.scene, sample.rasters, sample.memory)
            losses = compute_losses(state.predictions_2d, state.predictions_3d, sample.scene, config)
            total = ops.add(total, losses.total)
            for key, value in losses.components.items():
                components[key] = components.get(key, 0.0) + value / len(batch)
        loss = ops.mul(total, 1.0 / len(batch))

    diagnostics = {
        "step": step,
        "loss": loss.item(),
        "components": components,
        "scenes": [sample.scene.scene_id for sample in batch],
    }
    if not math.isfinite(loss.item()):
        raise NonFiniteLossError(f"non-finite loss {loss.item()} at step {step}", diagnostics)

    tape.backward(loss)
    grads = optimizer.gradients()
    norm = optimizer.global_norm(grads)
    if not math.isfinite(norm):
        bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
        diagnostics["non_finite_gradients"] = bad
        raise NonFiniteLossError(f"non-finite gradient at step {step} in {len(bad)} parameters", diagnostics)
    optimizer.step()
    return StepResult(step=step, loss=loss.item(), grad_norm=norm, components=components)


class Trainer:
    """Owns the detector, the optimizer and the training-set caches of one run.

    Attributes:
        step: Number of updates applied so far.
        loss_history: Loss of every applied step, in order.
    """

    def __init__(
        self,
        run: RunConfig,
        scenes: list[Scene],
        detector: SimPBDetector | None = None,
        optimizer: AdamW | None = None,
        output_dir: Path | None = None,
    ) -> None:
        if not scenes:
            raise DataError("training needs at least one scene")
        self.run = run
        self.scenes = scenes
        self.detector = detector or SimPBDetector(run)
        self.optimizer = optimizer or AdamW(self.detector.store, run.model)
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.step = 0
        self.loss_history: list[float] = []
        self._rasters = [rasterize_scene(scene, run.raster, run.model.num_classes) for scene in scenes]
        self._predecessor = {}
        for i, scene in enumerate(scenes):
            for j, other in enumerate(scenes):
                if follows(other, scene):
                    self._predecessor[i] = j
                    break

    def batch_indices(self, step: int) -> list[int]:
        size = self.run.model.batch_size
        return [(step * size + i) % len(self.scenes) for i in range(size)]

    def memory_for(self, index: int) -> TemporalMemory | None:
        """Memory from an untaped forward of the previous frame with the current parameters."""

        previous = self._predecessor.get(index)
        if previous is None or self.run.model.top_k_history == 0:
            return None
        state = self.detector.forward(self.scenes[previous], self._rasters[previous])
        return self.detector.propagate(state, self.scenes[index])

    def batch(self, step: int) -> list[TrainingSample]:
        return [
            TrainingSample(scene=self.scenes[i], rasters=self._rasters[i], memory=self.memory_for(i))
            for i in self.batch_indices(step)
        ]

    def fit(self, steps: int) -> list[float]:
        """Run `steps` more updates and return their losses."""

        process = psutil.Process(os.getpid())
        start_mem = process.memory_info().rss
        logger.info(
            f"Training {steps} steps from step {self.step} on {len(self.scenes)} scenes. "
            f"Current process memory usage: {start_mem // (1024 * 1024)} MB"
        )
        losses = []
        for _ in range(steps):
            try:
                result = train_step(self.detector, self.optimizer, self.batch(self.step), self.step)
            except NonFiniteLossError as e:
                self.__dump_diagnostics(e.diagnostics)
                logger.error(f"Training aborted: {e}")
                raise
            self.step += 1
            self.loss_history.append(result.loss)
            losses.append(result.loss)
            if self.step % self.run.model.log_every == 0 or self.step == 1:
                logger.info(f"step {self.step}: loss={result.loss:.5f} grad_norm={result.grad_norm:.3f}")

        end_mem = process.memory_info().rss
        logger.debug(
            f"Training finished at step {self.step}. "
            f"Final process memory usage: {end_mem // (1024 * 1024)} MB, "
            f"memory diff: {(end_mem - start_mem) // (1024 * 1024)} MB"
        )
        return losses

    def __dump_diagnostics(self, diagnostics: dict) -> None:
        if self.output_dir is None:
            return
        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.output_dir / f"nonfinite_step_{diagnostics['step']}.json"
        path.write_text(json.dumps(diagnostics, indent=2, default=str), encoding="utf-8")
        logger.error(f"Wrote diagnostic dump to {path}")
