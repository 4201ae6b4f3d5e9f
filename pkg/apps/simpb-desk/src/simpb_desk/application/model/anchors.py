# What it is: the numeric form of a 3D anchor that the network reads and writes.
# The 3D head predicts additive deltas on a 10-vector (x, y, z, log w, log l, log h,
# sin yaw, cos yaw, vx, vy). Logs keep sizes positive, the (sin, cos) pair keeps yaw
# continuous across the +-pi seam.

import math

import numpy as np

from ...domain import Anchor3D, ModelConfig, SceneGenConfig
from ..tensor import MLP, Linear, ParameterStore, Tensor

ENCODING_DIMS = 10
LOG_SIZE_MIN = math.log(0.1)
LOG_SIZE_MAX = math.log(50.0)


def encode_anchors(anchors: np.ndarray) -> np.ndarray:
    """[N, 9] anchors -> [N, 10] encodings."""

    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    return np.concatenate(
        [
            anchors[:, 0:3],
            np.log(anchors[:, 3:6]),
            np.sin(anchors[:, 6:7]),
            np.cos(anchors[:, 6:7]),
            anchors[:, 7:9],
        ],
        axis=1,
    )


def decode_anchors(encodings: np.ndarray) -> np.ndarray:
    """[N, 10] encodings -> [N, 9] anchors; log sizes are clipped to [log 0.1, log 50]."""

    enc = np.atleast_2d(np.asarray(encodings, dtype=np.float64))
    sizes = np.exp(np.clip(enc[:, 3:6], LOG_SIZE_MIN, LOG_SIZE_MAX))
    yaw = np.arctan2(enc[:, 6], enc[:, 7])
    yaw = np.where(yaw <= -np.pi, yaw + 2.0 * np.pi, yaw)
    return np.concatenate([enc[:, 0:3], sizes, yaw[:, None], enc[:, 8:10]], axis=1)


def encode_anchor(anchor: Anchor3D) -> np.ndarray:
    return encode_anchors(anchor.as_array()[None])[0]


def decode_anchor(encoding) -> Anchor3D:
    return Anchor3D.from_array(decode_anchors(np.asarray(encoding)[None])[0])


def normalized_encoding(anchors: np.ndarray, bev_range: float) -> np.ndarray:
    """Encoding scaled to O(1) per component: (x/R, y/R, z/4, log sizes, sin, cos, v/10)."""

    enc = encode_anchors(anchors)
    scale = np.array([bev_range, bev_range, 4.0, 1.0, 1.0, 1.0, 1.0, 1.0, 10.0, 10.0])
    return enc / scale


def initial_anchors(model: ModelConfig, scene: SceneGenConfig, rng: np.random.Generator) -> np.ndarray:
    """Starting anchors: uniform BEV centers, class-median sizes (by query index), yaw 0, v 0.

    Returns:
        np.ndarray: [N, 9] anchors, z at half the class-median height.
    """
    n = model.num_queries
    centers = rng.uniform(-scene.bev_range, scene.bev_range, size=(n, 2))
    sizes = np.array([scene.classes[i % scene.num_classes].size for i in range(n)], dtype=np.float64)
    anchors = np.zeros((n, 9))
    anchors[:, 0:2] = centers
    anchors[:, 2] = sizes[:, 2] / 2.0
    anchors[:, 3:6] = sizes
    return anchors


class AnchorEmbedding:
    """Positional embedding of anchors: MLP(10 -> C -> C) over the normalised encoding."""

    def __init__(self, store: ParameterStore, name: str, dim: int, bev_range: float) -> None:
        self.mlp = MLP(store, f"{name}.mlp", ENCODING_DIMS, dim, dim)
        self.bev_range = bev_range

    def __call__(self, anchors: np.ndarray) -> Tensor:
        return self.mlp(Tensor(normalized_encoding(anchors, self.bev_range)))


class PatchEmbedding:
    """Linear patch embedding: raster [H, W, C_in] -> feature map [H/p, W/p, C]."""

    def __init__(self, store: ParameterStore, name: str, in_channels: int, patch_size: int, dim: int) -> None:
        self.patch_size = patch_size
        self.proj = Linear(store, f"{name}.proj", patch_size * patch_size * in_channels, dim)

    def __call__(self, raster: Tensor) -> Tensor:
        H, W, C_in = raster.shape
        p = self.patch_size
        patches = raster.values.reshape(H // p, p, W // p, p, C_in).transpose(0, 2, 1, 3, 4)
        return self.proj(Tensor(patches.reshape(H // p, W // p, p * p * C_in)))
