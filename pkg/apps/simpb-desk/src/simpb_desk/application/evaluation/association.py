# What it is: the association metric.
# Phi(p3d, g2d) fires when a 3D prediction is a candidate for a 2D label: same class,
# center within tau_dis of the label's 3D object, and its projected rectangle overlaps
# the label by at least tau_iou. Psi additionally requires that the 2D prediction the
# model linked to p3d in that camera overlaps the label too.
#   AAR    = sum Psi / sum Phi * 100 (absent when sum Phi = 0)
#   Recall = sum Psi / N_2d * 100
# Every (p3d, g2d) pair is counted independently.

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ...domain import Box2D, CameraParams, Detection2D, Detection3D, DetectionRecord, GroundTruth2D, Scene, SceneObject
from ..geometry import iou2d, iou_matrix, project_anchors
from .common import filter_by_score, pair_records

DEFAULT_TAU_SWEEP = tuple(round(0.1 * i, 1) for i in range(1, 10))


class MatchPredicateParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau_dis: float = Field(default=2.0, gt=0.0)
    tau_iou: float = Field(default=0.5, gt=0.0, lt=1.0)


class AssociationPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    tau_iou: float
    matching: int
    valid_matching: int
    aar: float | None
    recall: float


class AssociationReport(BaseModel):
    """Counts at the primary tau_iou plus the curve over the sweep."""

    model_config = ConfigDict(frozen=True)

    tau_dis: float
    tau_iou: float
    num_gt_2d: int
    matching: int
    valid_matching: int
    aar: float | None
    recall: float
    curve: list[AssociationPoint] = Field(default_factory=list)

    def at(self, tau_iou: float) -> AssociationPoint | None:
        for point in self.curve:
            if abs(point.tau_iou - tau_iou) < 1e-9:
                return point
        return None


def _projected_rect(p3d: Detection3D, cam: CameraParams) -> np.ndarray | None:
    proj = project_anchors(np.asarray(p3d.anchor)[None], cam)
    return proj.rect[0] if proj.valid[0] else None


def _center_distance(p3d: Detection3D, g3d: SceneObject) -> float:
    a = g3d.anchor
    return float(np.linalg.norm(np.asarray(p3d.anchor[0:3]) - np.array([a.x, a.y, a.z])))


def phi(p3d: Detection3D, g2d: GroundTruth2D, g3d: SceneObject, cam: CameraParams, params: MatchPredicateParams) -> int:
    """1 iff classes agree, centers are within tau_dis and the projected rectangle reaches tau_iou."""

    if p3d.class_id != g3d.class_id:
        return 0
    if _center_distance(p3d, g3d) > params.tau_dis:
        return 0
    rect = _projected_rect(p3d, cam)
    if rect is None:
        return 0
    return int(iou_matrix(rect[None], np.array([g2d.box.corners()]))[0, 0] >= params.tau_iou)


def psi(
    p3d: Detection3D,
    p2d: Detection2D | None,
    g2d: GroundTruth2D,
    g3d: SceneObject,
    cam: CameraParams,
    params: MatchPredicateParams,
) -> int:
    """1 iff phi fires and the linked 2D prediction has the label's class and reaches tau_iou."""

    if p2d is None or not phi(p3d, g2d, g3d, cam, params):
        return 0
    if p2d.class_id != g3d.class_id:
        return 0
    box = Box2D(cx=p2d.cx, cy=p2d.cy, w=p2d.w, h=p2d.h)
    return int(iou2d(box, g2d.box) >= params.tau_iou)


def _scene_counts(record: DetectionRecord, scene: Scene, tau_dis: float, taus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Phi and Psi sums of one scene for every tau in `taus` (vectorised over pairs)."""

    phi_sum = np.zeros(len(taus), dtype=np.int64)
    psi_sum = np.zeros(len(taus), dtype=np.int64)
    if not record.detections_3d or not scene.ground_truth_2d:
        return phi_sum, psi_sum
    anchors = np.array([d.anchor for d in record.detections_3d], dtype=np.float64)
    classes = np.array([d.class_id for d in record.detections_3d])
    for v, cam in enumerate(scene.rig):
        labels = scene.labels_for_camera(v)
        if not labels:
            continue
        proj = project_anchors(anchors, cam)
        objects = [scene.object_by_id(g.object_id) for g in labels]
        g_centers = np.array([[o.anchor.x, o.anchor.y, o.anchor.z] for o in objects])
        g_classes = np.array([o.class_id for o in objects])
        g_rects = np.array([g.box.corners() for g in labels])

        dist = np.linalg.norm(anchors[:, None, 0:3] - g_centers[None, :, :], axis=-1)
        rect_iou = iou_matrix(np.nan_to_num(proj.rect), g_rects)
        base = (classes[:, None] == g_classes[None, :]) & (dist <= tau_dis) & proj.valid[:, None]

        linked_iou = np.zeros_like(rect_iou)
        linked_ok = np.zeros_like(base)
        for i, det in enumerate(record.detections_3d):
            p2d = record.linked_2d(v, det.id)
            if p2d is None:
                continue
            linked_iou[i] = iou_matrix(np.array([Box2D(cx=p2d.cx, cy=p2d.cy, w=p2d.w, h=p2d.h).corners()]), g_rects)[0]
            linked_ok[i] = p2d.class_id == g_classes

        for t, tau in enumerate(taus):
            phi_mask = base & (rect_iou >= tau)
            psi_mask = phi_mask & linked_ok & (linked_iou >= tau)
            phi_sum[t] += int(phi_mask.sum())
            psi_sum[t] += int(psi_mask.sum())
    return phi_sum, psi_sum


def aar_recall(
    records: list[DetectionRecord],
    scenes: list[Scene],
    params: MatchPredicateParams | None = None,
    tau_iou_sweep=DEFAULT_TAU_SWEEP,
    score_threshold: float = 0.0,
) -> AssociationReport:
    """Association accuracy and recall over a set of scenes.

    Args:
        records: Detection records (one per scene id).
        scenes: Ground-truth scenes.
        params: tau_dis and the primary tau_iou.
        tau_iou_sweep: Thresholds of the reported curve.
        score_threshold: Detections scoring below this are ignored.

    Returns:
        AssociationReport: aar is None wherever no candidate match exists.
    """
    params = params or MatchPredicateParams()
    taus = np.array(sorted(set(float(t) for t in tau_iou_sweep) | {params.tau_iou}))
    phi_total = np.zeros(len(taus), dtype=np.int64)
    psi_total = np.zeros(len(taus), dtype=np.int64)
    num_gt = 0
    for record, scene in pair_records(records, scenes):
        record = filter_by_score(record, score_threshold)
        phi_sum, psi_sum = _scene_counts(record, scene, params.tau_dis, taus)
        phi_total += phi_sum
        psi_total += psi_sum
        num_gt += len(scene.ground_truth_2d)

    def point(t: int) -> AssociationPoint:
        matching, valid = int(phi_total[t]), int(psi_total[t])
        return AssociationPoint(
            tau_iou=float(taus[t]),
            matching=matching,
            valid_matching=valid,
            aar=100.0 * valid / matching if matching else None,
            recall=100.0 * valid / num_gt if num_gt else 0.0,
        )

    sweep = {round(float(t), 9) for t in tau_iou_sweep}
    primary = point(int(np.flatnonzero(np.isclose(taus, params.tau_iou))[0]))
    return AssociationReport(
        tau_dis=params.tau_dis,
        tau_iou=params.tau_iou,
        num_gt_2d=num_gt,
        matching=primary.matching,
        valid_matching=primary.valid_matching,
        aar=primary.aar,
        recall=primary.recall,
        curve=[point(t) for t in range(len(taus)) if round(float(taus[t]), 9) in sweep],
    )
