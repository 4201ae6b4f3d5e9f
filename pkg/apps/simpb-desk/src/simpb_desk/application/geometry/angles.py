import math

import numpy as np

from ...domain import Anchor3D, CameraParams
from ...exceptions import GeometryError
from ... import utils
from .projection import FRONT_EPS, to_camera_frame


def camera_frame_yaw(yaw: float, cam: CameraParams) -> float:
    """Heading in the camera frame, from the rotated ego heading vector.

    With the camera frame x right, y down, z forward, a heading vector d maps to
    ry = atan2(-d_z, d_x) (rotation about the camera y axis).
    """
    heading = np.array([math.cos(yaw), math.sin(yaw), 0.0])
    d = cam.E[:3, :3] @ heading
    return math.atan2(-d[2], d[0])


def alpha_angle(anchor: Anchor3D, cam: CameraParams) -> float:
    """Observation angle alpha = ry - atan2(x_cam, z_cam), wrapped into (-pi, pi].

    Raises:
        GeometryError: If the box center is not in front of the camera.
    """
    center_cam = to_camera_frame(np.array([anchor.x, anchor.y, anchor.z]), cam)
    if center_cam[2] <= FRONT_EPS:
        raise GeometryError(f"alpha undefined: box center is behind the camera (z_cam={center_cam[2]:.3g})")
    ray = math.atan2(center_cam[0], center_cam[2])
    return utils.wrap_angle(camera_frame_yaw(anchor.yaw, cam) - ray)


def encode_angle(angle) -> np.ndarray:
    """(sin, cos) encoding; identical for angle and angle + 2*pi."""

    angle = np.asarray(angle, dtype=np.float64)
    return np.stack([np.sin(angle), np.cos(angle)], axis=-1)


def decode_angle(encoded: np.ndarray) -> np.ndarray:
    """atan2 of a (sin, cos) pair, in (-pi, pi]."""

    encoded = np.asarray(encoded, dtype=np.float64)
    return utils.wrap_angles(np.arctan2(encoded[..., 0], encoded[..., 1]))
