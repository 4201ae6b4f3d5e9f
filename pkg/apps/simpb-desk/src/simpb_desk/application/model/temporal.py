# Top-K history propagation between consecutive frames of a sequence.
# The K most confident 3D queries of a frame become the memory the next frame's temporal
# cross-attention reads. Their anchors are moved into the next frame: first by their own
# velocity over the frame interval, then through the ego motion between the two frames.

from dataclasses import dataclass

import numpy as np
from loguru import logger

from ..geometry import compensate_anchors
from ..tensor import Tensor


@dataclass(frozen=True)
class TemporalMemory:
    """Propagated history: queries [K, C] (detached), anchors [K, 9], scores [K]."""

    queries: Tensor
    anchors: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return int(self.anchors.shape[0])

    @classmethod
    def empty(cls, dim: int) -> "TemporalMemory":
        return cls(queries=Tensor(np.zeros((0, dim))), anchors=np.zeros((0, 9)), scores=np.zeros(0))


def select_top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k highest scores, highest first (ties keep the lower index first)."""

    k = max(0, min(int(k), len(scores)))
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")[:k]


def propagate_temporal(
    queries: Tensor,
    anchors: np.ndarray,
    scores: np.ndarray,
    k: int,
    ego_pose_delta: np.ndarray | None = None,
    dt: float = 0.0,
) -> TemporalMemory:
    """Keep the top-k queries by score as the next frame's memory.

    k larger than N is clamped to N; k = 0 gives an empty memory.
    """
    if k > len(scores):
        logger.debug(f"top-k history of {k} clamped to {len(scores)} queries")
    index = select_top_k(scores, k)
    return TemporalMemory(
        queries=Tensor(queries.values[index].copy()),
        anchors=compensate_anchors(np.asarray(anchors)[index], ego_pose_delta, dt),
        scores=np.asarray(scores, dtype=np.float64)[index],
    )
