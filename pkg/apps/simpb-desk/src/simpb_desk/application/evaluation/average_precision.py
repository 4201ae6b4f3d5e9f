# Single-threshold 2D average precision.
# Per class: detections from all scenes and cameras are sorted by score, each one greedily
# takes the best still-unmatched label of the same scene and camera when the IoU reaches
# the threshold (TP), otherwise it is a FP. Precision/recall come from cumulative TP/FP
# counts and AP is the all-point interpolated area under that curve.

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ...domain import DetectionRecord, Scene
from ..geometry import cxcywh_to_xyxy, iou_matrix
from .common import pair_records


class PRPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    class_id: int
    score: float
    recall: float
    precision: float


class APResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    iou_threshold: float
    per_class: dict[int, float] = Field(default_factory=dict)
    mean: float | None = None
    pr_points: list[PRPoint] = Field(default_factory=list)


def every_point_interpolation(recall: np.ndarray, precision: np.ndarray) -> float:
    """Area under the precision envelope, summed at every recall change."""

    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def average_precision_2d(records: list[DetectionRecord], scenes: list[Scene], iou_threshold: float = 0.5) -> APResult:
    """AP per class at one IoU threshold; classes without ground truth are left out of the mean."""

    # (score, order, class, scene index, camera, xyxy box)
    detections = []
    gt: dict[tuple[int, int, int], np.ndarray] = {}  # (class, scene, camera) -> [g, 4]
    gt_count: dict[int, int] = {}
    order = 0
    for s, (record, scene) in enumerate(pair_records(records, scenes)):
        for label in scene.ground_truth_2d:
            cls = scene.object_by_id(label.object_id).class_id
            key = (cls, s, label.camera)
            gt[key] = np.vstack([gt.get(key, np.zeros((0, 4))), np.array(label.box.corners())])
            gt_count[cls] = gt_count.get(cls, 0) + 1
        for det in record.detections_2d:
            box = cxcywh_to_xyxy(np.array([det.cx, det.cy, det.w, det.h]))
            detections.append((det.score, order, det.class_id, s, det.camera, box))
            order += 1

    per_class: dict[int, float] = {}
    pr_points: list[PRPoint] = []
    for cls in sorted(gt_count):
        dets = sorted((d for d in detections if d[2] == cls), key=lambda d: (-d[0], d[1]))
        if not dets:
            per_class[cls] = 0.0
            continue
        used = {key: np.zeros(len(boxes), dtype=bool) for key, boxes in gt.items() if key[0] == cls}
        true_pos = np.zeros(len(dets))
        for k, (_, _, _, s, camera, box) in enumerate(dets):
            key = (cls, s, camera)
            if key not in gt:
                continue
            ious = iou_matrix(box[None], gt[key])[0]
            ious[used[key]] = -1.0
            best = int(np.argmax(ious))
            if ious[best] >= iou_threshold:
                used[key][best] = True
                true_pos[k] = 1.0
        acc_tp = np.cumsum(true_pos)
        acc_fp = np.cumsum(1.0 - true_pos)
        recall = acc_tp / gt_count[cls]
        precision = acc_tp / (acc_tp + acc_fp)
        per_class[cls] = every_point_interpolation(recall, precision)
        pr_points.extend(
            PRPoint(class_id=cls, score=float(d[0]), recall=float(r), precision=float(p))
            for d, r, p in zip(dets, recall, precision)
        )
    mean = float(np.mean(list(per_class.values()))) if per_class else None
    return APResult(iou_threshold=iou_threshold, per_class=per_class, mean=mean, pr_points=pr_points)
