# The geometric vocabulary shared by every other module: cameras, 3D anchors and 2D boxes.
# These are pydantic models because they cross file boundaries (scene JSONL, detection
# dumps). Hot loops work on numpy arrays; `as_array` / `from_array` convert at the edges.

from functools import cached_property

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .. import utils

ANCHOR_FIELDS = ("x", "y", "z", "w", "l", "h", "yaw", "vx", "vy")


class CameraParams(BaseModel):
    """Pinhole camera: ego-frame homogeneous points -> camera frame -> pixels.

    Attributes:
        intrinsic: 3x3 matrix [[fx, 0, cx], [0, fy, cy], [0, 0, 1]].
        extrinsic: 4x4 matrix mapping ego-frame homogeneous points into the camera frame
            (camera frame: x right, y down, z forward).
        image_size: (W, H) in pixels.
    """

    model_config = ConfigDict(frozen=True)

    intrinsic: list[list[float]]
    extrinsic: list[list[float]]
    image_size: tuple[int, int]

    @model_validator(mode="after")
    def check_calibration(self) -> "CameraParams":
        K = np.asarray(self.intrinsic, dtype=np.float64)
        E = np.asarray(self.extrinsic, dtype=np.float64)
        if K.shape != (3, 3) or E.shape != (4, 4):
            raise ValueError(f"intrinsic must be 3x3 and extrinsic 4x4, got {K.shape} and {E.shape}")
        W, H = self.image_size
        if W <= 0 or H <= 0:
            raise ValueError(f"image_size must be positive, got {self.image_size}")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("focal lengths fx, fy must be positive")
        if not (0 < K[0, 2] < W and 0 < K[1, 2] < H):
            raise ValueError("principal point must lie strictly inside the image")
        R = E[:3, :3]
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-9) or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("extrinsic rotation must be orthonormal with det = +1")
        return self

    @cached_property
    def K(self) -> np.ndarray:
        return np.asarray(self.intrinsic, dtype=np.float64)

    @cached_property
    def E(self) -> np.ndarray:
        return np.asarray(self.extrinsic, dtype=np.float64)

    @property
    def width(self) -> int:
        return self.image_size[0]

    @property
    def height(self) -> int:
        return self.image_size[1]

    @classmethod
    def from_mounting(
        cls,
        yaw: float,
        hfov: float,
        image_size: tuple[int, int],
        height: float = 1.5,
    ) -> "CameraParams":
        """Build a forward-looking camera mounted at (0, 0, height), rotated `yaw` about ego z.

        Args:
            yaw: Heading of the optical axis in the ego frame (radians, x forward, y left).
            hfov: Horizontal field of view (radians).
            image_size: (W, H) pixels.
            height: Mounting height above the ego origin (meters).

        Returns:
            CameraParams: The calibrated camera.
        """
        W, H = image_size
        fx = (W / 2.0) / np.tan(hfov / 2.0)
        intrinsic = [[fx, 0.0, W / 2.0], [0.0, fx, H / 2.0], [0.0, 0.0, 1.0]]

        forward = np.array([np.cos(yaw), np.sin(yaw), 0.0])
        right = np.array([np.sin(yaw), -np.cos(yaw), 0.0])
        down = np.array([0.0, 0.0, -1.0])
        R = np.stack([right, down, forward])  # rows: camera axes expressed in ego
        t = -R @ np.array([0.0, 0.0, height])
        extrinsic = np.eye(4)
        extrinsic[:3, :3] = R
        extrinsic[:3, 3] = t
        return cls(intrinsic=intrinsic, extrinsic=extrinsic.tolist(), image_size=(W, H))


class Anchor3D(BaseModel):
    """A 3D box hypothesis in the ego frame.

    Center (x, y, z) and size (w, l, h) in meters, yaw in radians wrapped into (-pi, pi],
    velocity (vx, vy) in m/s.
    """

    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    z: float
    w: float = Field(gt=0)
    l: float = Field(gt=0)
    h: float = Field(gt=0)
    yaw: float = 0.0
    vx: float = 0.0
    vy: float = 0.0

    @field_validator("yaw")
    @classmethod
    def wrap_yaw(cls, value: float) -> float:
        return utils.wrap_angle(value)

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in ANCHOR_FIELDS], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "Anchor3D":
        return cls(**{name: float(v) for name, v in zip(ANCHOR_FIELDS, values)})

    def clamped(self, max_lw: float = 35.0, max_h: float = 10.0) -> "Anchor3D":
        """Projection-time copy with l, w <= max_lw and h <= max_h."""

        return self.model_copy(
            update={"w": min(self.w, max_lw), "l": min(self.l, max_lw), "h": min(self.h, max_h)}
        )


class Box2D(BaseModel):
    """Axis-aligned image box in center form (pixels)."""

    model_config = ConfigDict(frozen=True)

    cx: float
    cy: float
    w: float = Field(ge=0)
    h: float = Field(ge=0)
    class_id: int = 0
    score: float = Field(default=1.0, ge=0.0, le=1.0)

    @classmethod
    def from_corners(cls, x1: float, y1: float, x2: float, y2: float, **kwargs) -> "Box2D":
        return cls(cx=(x1 + x2) / 2.0, cy=(y1 + y2) / 2.0, w=x2 - x1, h=y2 - y1, **kwargs)

    def corners(self) -> tuple[float, float, float, float]:
        return (
            self.cx - self.w / 2.0,
            self.cy - self.h / 2.0,
            self.cx + self.w / 2.0,
            self.cy + self.h / 2.0,
        )

    @property
    def area(self) -> float:
        return self.w * self.h
