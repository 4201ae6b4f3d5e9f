# Prediction heads shared by every decoder layer.
# 2D head (one for all cameras): class logits, an alpha (sin, cos) pair and a box placed
# relative to the query's reference point. 3D head: class logits plus additive deltas on
# the anchor encoding. Both regression branches end in zero-initialised layers, so an
# untrained 2D head outputs a default box centered on the reference point and an
# untrained 3D head leaves the anchor where it was.

import math
from dataclasses import dataclass, field

import numpy as np

from ...domain import CameraParams
from ...exceptions import UsageError
from ..allocation import MappingMatrix
from ..tensor import MLP, Linear, ParameterStore, Tensor, ops
from .anchors import ENCODING_DIMS, decode_anchors, encode_anchors

CLASS_PRIOR = 0.01


def _prior_bias(store: ParameterStore, name: str, num_classes: int) -> Tensor:
    return store.add(name, np.full(num_classes, -math.log((1.0 - CLASS_PRIOR) / CLASS_PRIOR)))


@dataclass(frozen=True)
class Predictions2D:
    """Outputs of the 2D head for every 2D query of one layer.

    Attributes:
        cls_logits: [M, K].
        alpha: [M, 2] raw (sin, cos) pair.
        boxes: [M, 4] (cx, cy, w, h) in pixels.
        mapping: Mapping that produced the 2D queries (owner and camera of each row).
        image_sizes: [M, 2] (W, H) of each row's camera.
    """

    cls_logits: Tensor
    alpha: Tensor
    boxes: Tensor
    mapping: MappingMatrix
    image_sizes: np.ndarray
    layer: int = 0

    @property
    def cameras(self) -> np.ndarray:
        return self.mapping.cameras

    @property
    def owners(self) -> np.ndarray:
        return self.mapping.owners


@dataclass(frozen=True)
class Predictions3D:
    """Outputs of the 3D head for all N queries.

    Attributes:
        cls_logits: [N, K].
        encoding: [N, 10] refined anchor encoding (input encoding + deltas).
        anchors: [N, 9] decoded refined anchors (detached, log sizes clipped).
        aux: True for the auxiliary tap after aggregation.
    """

    cls_logits: Tensor
    encoding: Tensor
    anchors: np.ndarray = field(repr=False)
    aux: bool = False
    layer: int = 0

    def scores(self) -> np.ndarray:
        """Maximum class probability of each query."""

        return (1.0 / (1.0 + np.exp(-self.cls_logits.values))).max(axis=1)


class Head2D:
    def __init__(self, store: ParameterStore, name: str, dim: int, num_classes: int, default_box_fraction: float = 0.2) -> None:
        self.cls = Linear(store, f"{name}.cls", dim, num_classes, bias=False)
        self.cls_bias = _prior_bias(store, f"{name}.cls.bias", num_classes)
        self.alpha = Linear(store, f"{name}.alpha", dim, 2)
        self.box = MLP(store, f"{name}.box", dim, dim, 4, final_init="zeros")
        self.size_logit = math.log(default_box_fraction / (1.0 - default_box_fraction))

    def __call__(
        self,
        q2d: Tensor,
        reference_points: np.ndarray,
        mapping: MappingMatrix,
        rig: list[CameraParams],
        layer: int = 0,
    ) -> Predictions2D:
        M = q2d.shape[0]
        sizes = np.array([rig[v].image_size for v in mapping.cameras], dtype=np.float64).reshape(M, 2)
        # cx = u_ref + W (sigmoid(d0) - 1/2), w = W sigmoid(d2 + logit(fraction)), same for y / h
        offset = np.tile([0.0, 0.0, self.size_logit, self.size_logit], (M, 1))
        shift = np.tile([0.5, 0.5, 0.0, 0.0], (M, 1))
        scale = np.concatenate([sizes, sizes], axis=1)
        base = np.concatenate([np.asarray(reference_points, dtype=np.float64).reshape(M, 2), np.zeros((M, 2))], axis=1)
        squashed = ops.sigmoid(ops.add(self.box(q2d), offset))
        boxes = ops.add(ops.mul(ops.sub(squashed, shift), scale), base)
        return Predictions2D(
            cls_logits=ops.add(self.cls(q2d), self.cls_bias),
            alpha=self.alpha(q2d),
            boxes=boxes,
            mapping=mapping,
            image_sizes=sizes,
            layer=layer,
        )


class Head3D:
    def __init__(self, store: ParameterStore, name: str, dim: int, num_classes: int) -> None:
        self.cls = Linear(store, f"{name}.cls", dim, num_classes, bias=False)
        self.cls_bias = _prior_bias(store, f"{name}.cls.bias", num_classes)
        self.reg = MLP(store, f"{name}.reg", dim, dim, ENCODING_DIMS, final_init="zeros")

    def __call__(self, q3d: Tensor, anchors: np.ndarray, layer: int = 0, aux: bool = False) -> Predictions3D:
        if q3d.shape[0] != len(anchors):
            raise UsageError(f"3D head: {q3d.shape[0]} queries but {len(anchors)} anchors")
        encoding = ops.add(self.reg(q3d), encode_anchors(anchors))
        return Predictions3D(
            cls_logits=ops.add(self.cls(q3d), self.cls_bias),
            encoding=encoding,
            anchors=decode_anchors(encoding.values),
            aux=aux,
            layer=layer,
        )


def predict_heads(
    queries: Tensor,
    mode: str,
    *,
    head_2d: Head2D | None = None,
    head_3d: Head3D | None = None,
    anchors: np.ndarray | None = None,
    reference_points: np.ndarray | None = None,
    mapping: MappingMatrix | None = None,
    rig: list[CameraParams] | None = None,
) -> Predictions2D | Predictions3D:
    """Apply the 2D or 3D head to a query set.

    Args:
        queries: [M, C] 2D queries or [N, C] 3D queries.
        mode: "2d" or "3d".

    Raises:
        UsageError: On an unknown mode or missing context for it.
    """
    if mode == "2d":
        if head_2d is None or reference_points is None or mapping is None or rig is None:
            raise UsageError("2D heads need head_2d, reference_points, mapping and rig")
        return head_2d(queries, reference_points, mapping, rig)
    if mode == "3d":
        if head_3d is None or anchors is None:
            raise UsageError("3D heads need head_3d and anchors")
        return head_3d(queries, anchors)
    raise UsageError(f"unknown head mode {mode!r}; expected '2d' or '3d'")
