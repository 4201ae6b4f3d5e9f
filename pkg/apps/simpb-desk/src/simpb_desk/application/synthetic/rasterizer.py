# What it is: the backbone stand-in.
# Each camera image becomes a stack of per-pixel channels painted from the projected box
# rectangles: presence, normalised inverse depth, class one-hot and (optionally) the
# pixel's normalised (u, v). Boxes are painted nearest first and a pixel keeps the first
# box that covers it, so the output does not depend on the order of the object list.

import numpy as np

from ...domain import AllocationStrategy, RasterConfig, Scene
from ...exceptions import UsageError
from ..geometry import project_anchors, to_camera_frame
from ..tensor import Tensor

PRESENCE, INVERSE_DEPTH, CLASS_START = 0, 1, 2
MIN_DEPTH = 0.1


def _paint_order(scene: Scene, cam_index: int) -> list[tuple[float, int, np.ndarray, int]]:
    """(depth, object_id, rect, class_id) of every object visible in the camera, nearest first."""

    if not scene.objects:
        return []
    cam = scene.rig[cam_index]
    anchors = np.stack([obj.anchor.as_array() for obj in scene.objects])
    proj = project_anchors(anchors, cam, AllocationStrategy.CENTER_CORNERS)
    depths = to_camera_frame(anchors[:, 0:3], cam)[:, 2]
    items = [
        (max(float(depths[i]), MIN_DEPTH), obj.object_id, proj.rect[i], obj.class_id)
        for i, obj in enumerate(scene.objects)
        if proj.valid[i]
    ]
    return sorted(items, key=lambda item: (item[0], item[1]))


def rasterize_array(scene: Scene, cam_index: int, config: RasterConfig, num_classes: int) -> np.ndarray:
    """[H, W, C_in] float64 channels for one camera."""

    if not 0 <= cam_index < scene.num_cameras:
        raise UsageError(f"camera {cam_index} is not in a rig of {scene.num_cameras}")
    W, H = scene.rig[cam_index].image_size
    out = np.zeros((H, W, config.input_channels(num_classes)))
    u = np.arange(W) + 0.5  # pixel centers
    v = np.arange(H) + 0.5
    painted = np.zeros((H, W), dtype=bool)
    for depth, _, rect, class_id in _paint_order(scene, cam_index):
        x1, y1, x2, y2 = rect
        cover = ((v >= y1) & (v < y2))[:, None] & ((u >= x1) & (u < x2))[None, :] & ~painted
        out[cover, PRESENCE] = 1.0
        out[cover, INVERSE_DEPTH] = min(1.0, config.depth_reference / depth)
        if 0 <= class_id < num_classes:
            out[cover, CLASS_START + class_id] = 1.0
        painted |= cover
    if config.coord_channels:
        out[:, :, CLASS_START + num_classes] = (u / W)[None, :]
        out[:, :, CLASS_START + num_classes + 1] = (v / H)[:, None]
    return out


def rasterize_features(scene: Scene, cam_index: int, config: RasterConfig, num_classes: int) -> Tensor:
    """Rasterized input channels of one camera as a constant Tensor [H, W, C_in].

    Raises:
        UsageError: If the camera does not exist or its image is not divisible by the patch size.
    """
    values = rasterize_array(scene, cam_index, config, num_classes)
    H, W = values.shape[:2]
    if W % config.patch_size or H % config.patch_size:
        raise UsageError(f"image size {(W, H)} is not divisible by patch size {config.patch_size}")
    return Tensor(values)


def rasterize_scene(scene: Scene, config: RasterConfig, num_classes: int) -> list[Tensor]:
    return [rasterize_features(scene, v, config, num_classes) for v in range(scene.num_cameras)]
