# Bipartite matching between predictions and ground truth.
# The solver is scipy's linear_sum_assignment; this module builds the cost matrices so
# that matching mirrors the loss terms (class, L1 and GIoU for 2D; class and center L1
# for 3D).

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ...exceptions import UsageError
from ..geometry import cxcywh_to_xyxy, giou_matrix


@dataclass(frozen=True)
class Assignment:
    """min(n, m) matched (row, col) pairs, rows ascending."""

    rows: np.ndarray
    cols: np.ndarray
    cost: float

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    def pairs(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in zip(self.rows, self.cols)}


def hungarian_match(cost: np.ndarray) -> Assignment:
    """Minimum-total-cost one-to-one assignment of an n x m cost matrix.

    Raises:
        UsageError: If the matrix is not 2D or holds NaN.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise UsageError(f"cost matrix must be 2D, got shape {cost.shape}")
    if np.isnan(cost).any():
        raise UsageError("cost matrix contains NaN")
    if cost.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return Assignment(rows=empty, cols=empty, cost=0.0)
    rows, cols = linear_sum_assignment(cost)
    return Assignment(rows=rows.astype(np.int64), cols=cols.astype(np.int64), cost=float(cost[rows, cols].sum()))


def focal_class_cost(logits: np.ndarray, labels: np.ndarray, alpha: float = 0.25, gamma: float = 2.0) -> np.ndarray:
    """[n, m] focal classification cost of predicting class labels[j] with logits[i]."""

    p = 1.0 / (1.0 + np.exp(-np.asarray(logits, dtype=np.float64)))
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    neg = (1.0 - alpha) * p**gamma * -np.log(1.0 - p)
    pos = alpha * (1.0 - p) ** gamma * -np.log(p)
    return (pos - neg)[:, np.asarray(labels, dtype=np.int64)]


def cost_matrix_2d(
    logits: np.ndarray,
    boxes: np.ndarray,
    image_sizes: np.ndarray,
    gt_boxes: np.ndarray,
    gt_labels: np.ndarray,
    weights: tuple[float, float, float],
    focal: tuple[float, float] = (0.25, 2.0),
) -> np.ndarray:
    """Class + normalised-L1 + GIoU cost between 2D predictions [n] and labels [m] of one camera."""

    w_cls, w_l1, w_giou = weights
    scale = np.concatenate([image_sizes, image_sizes], axis=1)  # [n, 4]
    pred_norm = boxes / scale
    gt_norm = gt_boxes[None, :, :] / scale[:, None, :]
    l1 = np.abs(pred_norm[:, None, :] - gt_norm).sum(axis=-1)
    giou = giou_matrix(cxcywh_to_xyxy(boxes), cxcywh_to_xyxy(gt_boxes))
    return w_cls * focal_class_cost(logits, gt_labels, *focal) + w_l1 * l1 - w_giou * giou


def cost_matrix_3d(
    logits: np.ndarray,
    anchors: np.ndarray,
    gt_anchors: np.ndarray,
    gt_labels: np.ndarray,
    weights: tuple[float, float],
    focal: tuple[float, float] = (0.25, 2.0),
) -> np.ndarray:
    """Class + center-L1 cost between 3D predictions [n] and objects [m]."""

    w_cls, w_center = weights
    center = np.abs(anchors[:, None, 0:3] - gt_anchors[None, :, 0:3]).sum(axis=-1)
    return w_cls * focal_class_cost(logits, gt_labels, *focal) + w_center * center
