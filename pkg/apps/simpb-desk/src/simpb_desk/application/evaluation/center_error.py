import numpy as np
from pydantic import BaseModel, ConfigDict

from ...domain import DetectionRecord, Scene
from ... import utils
from .common import filter_by_score, pair_records

DEFAULT_GATE = 2.0


class CenterErrorSummary(BaseModel):
    """Center distance (m) and absolute yaw error (rad) over greedily matched pairs."""

    model_config = ConfigDict(frozen=True)

    matched: int
    num_gt: int
    mean: float | None
    median: float | None
    mean_yaw_error: float | None


def greedy_center_matches(pred: np.ndarray, gt: np.ndarray, gate: float = DEFAULT_GATE) -> list[tuple[int, int, float]]:
    """Closest-first one-to-one matching of centers within `gate` meters."""

    if len(pred) == 0 or len(gt) == 0:
        return []
    dist = np.linalg.norm(pred[:, None, 0:3] - gt[None, :, 0:3], axis=-1)
    candidates = sorted(
        ((float(dist[i, j]), i, j) for i, j in zip(*np.nonzero(dist <= gate))), key=lambda c: (c[0], c[1], c[2])
    )
    used_p, used_g, matches = set(), set(), []
    for d, i, j in candidates:
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        matches.append((int(i), int(j), d))
    return matches


def center_error_3d(
    records: list[DetectionRecord],
    scenes: list[Scene],
    gate: float = DEFAULT_GATE,
    score_threshold: float = 0.0,
) -> CenterErrorSummary:
    distances, yaw_errors, num_gt = [], [], 0
    for record, scene in pair_records(records, scenes):
        record = filter_by_score(record, score_threshold)
        pred = np.array([d.anchor for d in record.detections_3d], dtype=np.float64).reshape(-1, 9)
        gt = np.array([o.anchor.as_array() for o in scene.objects], dtype=np.float64).reshape(-1, 9)
        num_gt += len(gt)
        for i, j, d in greedy_center_matches(pred, gt, gate):
            distances.append(d)
            yaw_errors.append(abs(utils.wrap_angle(pred[i, 6] - gt[j, 6])))
    if not distances:
        return CenterErrorSummary(matched=0, num_gt=num_gt, mean=None, median=None, mean_yaw_error=None)
    return CenterErrorSummary(
        matched=len(distances),
        num_gt=num_gt,
        mean=float(np.mean(distances)),
        median=float(np.median(distances)),
        mean_yaw_error=float(np.mean(yaw_errors)),
    )
