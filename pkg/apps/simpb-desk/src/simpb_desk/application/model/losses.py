# What it is: the training objective.
# L = sum over 2D layers of L_2d + sum over 3D layers of L_3d (+ weighted auxiliary taps),
# where L_2d = focal + L1 + GIoU + lambda_alpha * L_alpha per camera-group matching and
# L_3d = focal + weighted L1 over the anchor encoding after one global matching.
# Regression terms are normalised by the number of ground-truth boxes; L_alpha is a mean
# over matched pairs.

from dataclasses import dataclass, field

import numpy as np

from ...domain import ModelConfig, Scene
from ..geometry import cxcywh_to_xyxy, encode_angle
from ..tensor import Tensor, ops
from .anchors import encode_anchors
from .heads import Predictions2D, Predictions3D
from .matching import cost_matrix_2d, cost_matrix_3d, hungarian_match


@dataclass
class LossBreakdown:
    """Scalar training loss plus float components for logging."""

    total: Tensor
    components: dict[str, float] = field(default_factory=dict)

    def add(self, key: str, value: Tensor | float, weight: float = 1.0) -> None:
        scalar = value.item() if isinstance(value, Tensor) else float(value)
        self.components[key] = self.components.get(key, 0.0) + weight * scalar

    @property
    def value(self) -> float:
        return self.total.item()


@dataclass(frozen=True)
class SceneTargets:
    """Ground truth of one scene in array form."""

    anchors: np.ndarray  # [G, 9]
    labels: np.ndarray  # [G]
    boxes_2d: list[np.ndarray]  # per camera [g_v, 4] cxcywh
    labels_2d: list[np.ndarray]  # per camera [g_v]
    alpha_2d: list[np.ndarray]  # per camera [g_v]

    @property
    def num_2d(self) -> int:
        return int(sum(len(labels) for labels in self.labels_2d))

    @classmethod
    def from_scene(cls, scene: Scene) -> "SceneTargets":
        anchors = np.array([obj.anchor.as_array() for obj in scene.objects], dtype=np.float64).reshape(-1, 9)
        labels = np.array([obj.class_id for obj in scene.objects], dtype=np.int64)
        boxes, labels_2d, alphas = [], [], []
        for v in range(scene.num_cameras):
            camera_labels = scene.labels_for_camera(v)
            boxes.append(
                np.array([[g.box.cx, g.box.cy, g.box.w, g.box.h] for g in camera_labels], dtype=np.float64).reshape(-1, 4)
            )
            labels_2d.append(
                np.array([scene.object_by_id(g.object_id).class_id for g in camera_labels], dtype=np.int64)
            )
            alphas.append(np.array([g.alpha for g in camera_labels], dtype=np.float64))
        return cls(anchors=anchors, labels=labels, boxes_2d=boxes, labels_2d=labels_2d, alpha_2d=alphas)


def giou_loss(pred: Tensor, target: np.ndarray) -> Tensor:
    """1 - GIoU per row between predicted (cx, cy, w, h) [k, 4] and fixed target boxes."""

    cx, cy = ops.slice_last(pred, 0, 1), ops.slice_last(pred, 1, 2)
    half_w, half_h = ops.mul(ops.slice_last(pred, 2, 3), 0.5), ops.mul(ops.slice_last(pred, 3, 4), 0.5)
    px1, px2 = ops.sub(cx, half_w), ops.add(cx, half_w)
    py1, py2 = ops.sub(cy, half_h), ops.add(cy, half_h)
    t = cxcywh_to_xyxy(target)
    tx1, ty1, tx2, ty2 = (t[:, i : i + 1] for i in range(4))

    iw = ops.clamp_min(ops.sub(ops.minimum(px2, tx2), ops.maximum(px1, tx1)), 0.0)
    ih = ops.clamp_min(ops.sub(ops.minimum(py2, ty2), ops.maximum(py1, ty1)), 0.0)
    inter = ops.mul(iw, ih)
    area_p = ops.mul(ops.sub(px2, px1), ops.sub(py2, py1))
    area_t = (tx2 - tx1) * (ty2 - ty1)
    union = ops.sub(ops.add(area_p, area_t), inter)
    hull = ops.mul(
        ops.sub(ops.maximum(px2, tx2), ops.minimum(px1, tx1)),
        ops.sub(ops.maximum(py2, ty2), ops.minimum(py1, ty1)),
    )
    giou = ops.sub(ops.div(inter, union), ops.div(ops.sub(hull, union), hull))
    return ops.reshape(ops.sub(1.0, giou), (pred.shape[0],))


def alpha_loss(pred_alpha: Tensor, target_alpha: np.ndarray) -> Tensor:
    """Mean over pairs of |sin - sin_hat| + |cos - cos_hat|; zero when there are no pairs."""

    if pred_alpha.shape[0] == 0:
        return Tensor(0.0)
    diff = ops.abs(ops.sub(pred_alpha, encode_angle(target_alpha).reshape(-1, 2)))
    return ops.mul(ops.sum(diff), 1.0 / pred_alpha.shape[0])


def focal_classification(logits: Tensor, rows: np.ndarray, labels: np.ndarray, normaliser: float, config: ModelConfig) -> Tensor:
    targets = np.zeros(logits.shape)
    targets[rows, labels] = 1.0
    loss = ops.sigmoid_focal_loss(logits, targets, config.focal_alpha, config.focal_gamma)
    return ops.mul(ops.sum(loss), 1.0 / normaliser)


def loss_2d(pred: Predictions2D, targets: SceneTargets, config: ModelConfig, breakdown: LossBreakdown | None = None) -> Tensor:
    """L_detr2d + lambda_alpha * L_alpha for one 2D layer, matched per camera group."""

    focal = (config.focal_alpha, config.focal_gamma)
    weights = (config.loss_weight_cls_2d, config.loss_weight_l1_2d, config.loss_weight_giou_2d)
    rows, labels, boxes, alphas = [], [], [], []
    for v in range(pred.mapping.num_cameras):
        sl = pred.mapping.group_slice(v)
        if sl.stop == sl.start or v >= len(targets.labels_2d) or len(targets.labels_2d[v]) == 0:
            continue
        cost = cost_matrix_2d(
            pred.cls_logits.values[sl],
            pred.boxes.values[sl],
            pred.image_sizes[sl],
            targets.boxes_2d[v],
            targets.labels_2d[v],
            weights,
            focal,
        )
        match = hungarian_match(cost)
        rows.append(match.rows + sl.start)
        labels.append(targets.labels_2d[v][match.cols])
        boxes.append(targets.boxes_2d[v][match.cols])
        alphas.append(targets.alpha_2d[v][match.cols])

    normaliser = float(max(targets.num_2d, 1))
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    labels = np.concatenate(labels) if labels else np.zeros(0, dtype=np.int64)
    cls = focal_classification(pred.cls_logits, rows, labels, normaliser, config)
    total = ops.mul(cls, config.loss_weight_cls_2d)
    l1 = giou = l_alpha = Tensor(0.0)
    if len(rows):
        matched_boxes = ops.gather_rows(pred.boxes, rows)
        target_boxes = np.concatenate(boxes)
        scale = np.concatenate([pred.image_sizes[rows], pred.image_sizes[rows]], axis=1)
        l1 = ops.mul(ops.sum(ops.abs(ops.sub(ops.div(matched_boxes, scale), target_boxes / scale))), 1.0 / normaliser)
        giou = ops.mul(ops.sum(giou_loss(matched_boxes, target_boxes)), 1.0 / normaliser)
        l_alpha = alpha_loss(ops.gather_rows(pred.alpha, rows), np.concatenate(alphas))
        total = ops.add(total, ops.mul(l1, config.loss_weight_l1_2d))
        total = ops.add(total, ops.mul(giou, config.loss_weight_giou_2d))
        if config.lambda_alpha > 0:
            total = ops.add(total, ops.mul(l_alpha, config.lambda_alpha))
    if breakdown is not None:
        breakdown.add("cls_2d", cls, config.loss_weight_cls_2d)
        breakdown.add("l1_2d", l1, config.loss_weight_l1_2d)
        breakdown.add("giou_2d", giou, config.loss_weight_giou_2d)
        breakdown.add("alpha", l_alpha, config.lambda_alpha)
    return total


def loss_3d(pred: Predictions3D, targets: SceneTargets, config: ModelConfig, breakdown: LossBreakdown | None = None, weight: float = 1.0) -> Tensor:
    """Focal classification + weighted L1 on (center, log size, yaw sin/cos, velocity)."""

    focal = (config.focal_alpha, config.focal_gamma)
    normaliser = float(max(len(targets.labels), 1))
    rows = cols = np.zeros(0, dtype=np.int64)
    if len(targets.labels):
        cost = cost_matrix_3d(
            pred.cls_logits.values,
            pred.anchors,
            targets.anchors,
            targets.labels,
            (config.loss_weight_cls_3d, config.loss_weight_center),
            focal,
        )
        match = hungarian_match(cost)
        rows, cols = match.rows, match.cols
    cls = focal_classification(pred.cls_logits, rows, targets.labels[cols], normaliser, config)
    total = ops.mul(cls, config.loss_weight_cls_3d)
    terms = {}
    if len(rows):
        diff = ops.abs(ops.sub(ops.gather_rows(pred.encoding, rows), encode_anchors(targets.anchors[cols])))
        for key, (lo, hi), w in (
            ("center", (0, 3), config.loss_weight_center),
            ("size", (3, 6), config.loss_weight_size),
            ("yaw", (6, 8), config.loss_weight_yaw),
            ("vel", (8, 10), config.loss_weight_vel),
        ):
            terms[key] = ops.mul(ops.sum(ops.slice_last(diff, lo, hi)), 1.0 / normaliser)
            total = ops.add(total, ops.mul(terms[key], w))
    if breakdown is not None:
        prefix = "aux_" if pred.aux else ""
        breakdown.add(f"{prefix}cls_3d", cls, weight * config.loss_weight_cls_3d)
        for key, w in (
            ("center", config.loss_weight_center),
            ("size", config.loss_weight_size),
            ("yaw", config.loss_weight_yaw),
            ("vel", config.loss_weight_vel),
        ):
            breakdown.add(f"{prefix}{key}", terms.get(key, 0.0), weight * w)
    return ops.mul(total, weight) if weight != 1.0 else total


def compute_losses(
    predictions_2d: list[Predictions2D],
    predictions_3d: list[Predictions3D],
    scene: Scene,
    config: ModelConfig,
) -> LossBreakdown:
    """Deep-supervised loss of one forward pass on one scene.

    Args:
        predictions_2d: Every 2D layer's predictions.
        predictions_3d: Every 3D layer's predictions, auxiliary taps included.
        scene: Ground truth.
        config: Loss weights.

    Returns:
        LossBreakdown: Scalar total (on the tape) and per-term floats.
    """
    targets = SceneTargets.from_scene(scene)
    breakdown = LossBreakdown(total=Tensor(0.0))
    total = Tensor(0.0)
    for pred in predictions_2d:
        total = ops.add(total, loss_2d(pred, targets, config, breakdown))
    for pred in predictions_3d:
        weight = config.aux_loss_weight if pred.aux else 1.0
        if weight == 0.0:
            continue
        total = ops.add(total, loss_3d(pred, targets, config, breakdown, weight))
    breakdown.total = total
    breakdown.components["total"] = total.item()
    return breakdown
