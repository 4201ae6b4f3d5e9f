# Purpose: pinhole multi-camera math used by allocation, scene labelling and evaluation.
# Everything is vectorised over anchors ([N, 9] arrays in ANCHOR_FIELDS order); the
# Anchor3D-taking wrappers exist for readability at call sites that handle one object.

from dataclasses import dataclass

import numpy as np

from ...domain import AllocationStrategy, Anchor3D, CameraParams

FRONT_EPS = 1e-6

# corner k (0..7): bit 0 -> -/+ l/2 along heading, bit 1 -> -/+ w/2 lateral, bit 2 -> -/+ h/2 vertical
_CORNER_SIGNS = np.array(
    [[-1.0 if k & 1 else 1.0, -1.0 if k & 2 else 1.0, -1.0 if k & 4 else 1.0] for k in range(8)]
)


def _rotation_z(yaw: np.ndarray) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    R = np.zeros(yaw.shape + (3, 3))
    R[..., 0, 0], R[..., 0, 1] = c, -s
    R[..., 1, 0], R[..., 1, 1] = s, c
    R[..., 2, 2] = 1.0
    return R


def box_corners_array(anchors: np.ndarray) -> np.ndarray:
    """Center plus the 8 yaw-rotated corners of each anchor.

    Args:
        anchors: [N, 9] array (x, y, z, w, l, h, yaw, vx, vy).

    Returns:
        np.ndarray: [N, 9, 3] ego-frame points; index 0 is the center, 1 + k is corner k.
    """
    anchors = np.atleast_2d(anchors)
    centers = anchors[:, 0:3]
    half = np.stack([anchors[:, 4], anchors[:, 3], anchors[:, 5]], axis=-1) / 2.0  # (l, w, h) / 2
    local = _CORNER_SIGNS[None, :, :] * half[:, None, :]  # [N, 8, 3]
    rotated = np.einsum("nij,nkj->nki", _rotation_z(anchors[:, 6]), local)
    return np.concatenate([centers[:, None, :], centers[:, None, :] + rotated], axis=1)


def box_corners(anchor: Anchor3D) -> np.ndarray:
    """[9, 3] points: center then corners in the documented bit order."""

    return box_corners_array(anchor.as_array()[None])[0]


def projection_points_array(anchors: np.ndarray, strategy: AllocationStrategy) -> np.ndarray:
    """The K ego points each anchor projects for allocation under `strategy`.

    center -> K=1; center_front_rear -> K=3 (center, front face, rear face);
    center_corners -> K=9. The uniform baseline projects only the center.
    """
    anchors = np.atleast_2d(anchors)
    centers = anchors[:, None, 0:3]
    if strategy in (AllocationStrategy.CENTER, AllocationStrategy.UNIFORM):
        return centers.copy()
    if strategy == AllocationStrategy.CENTER_FRONT_REAR:
        heading = np.stack([np.cos(anchors[:, 6]), np.sin(anchors[:, 6]), np.zeros(len(anchors))], axis=-1)
        offset = (anchors[:, 4] / 2.0)[:, None] * heading
        return np.stack([anchors[:, 0:3], anchors[:, 0:3] + offset, anchors[:, 0:3] - offset], axis=1)
    return box_corners_array(anchors)


def projection_points(anchor: Anchor3D, strategy: AllocationStrategy = AllocationStrategy.CENTER_CORNERS) -> np.ndarray:
    return projection_points_array(anchor.as_array()[None], strategy)[0]


def to_camera_frame(points: np.ndarray, cam: CameraParams) -> np.ndarray:
    """Apply the 4x4 extrinsic to ego-frame points [..., 3]."""

    return points @ cam.E[:3, :3].T + cam.E[:3, 3]


def project_points(points: np.ndarray, cam: CameraParams) -> tuple[np.ndarray, np.ndarray]:
    """Project ego-frame points to pixels.

    Args:
        points: [..., 3] ego-frame points.
        cam: Camera to project into.

    Returns:
        tuple: (uv [..., 2] pixel coordinates, front [...] bool with z_cam > 1e-6).
        Pixels of points behind the camera are still computed (perspective divide by
        their z) but must not be used for validity.
    """
    p_cam = to_camera_frame(np.asarray(points, dtype=np.float64), cam)
    z = p_cam[..., 2]
    front = z > FRONT_EPS
    safe_z = np.where(np.abs(z) < 1e-12, 1e-12, z)
    K = cam.K
    u = (K[0, 0] * p_cam[..., 0] + K[0, 1] * p_cam[..., 1]) / safe_z + K[0, 2]
    v = (K[1, 1] * p_cam[..., 1]) / safe_z + K[1, 2]
    return np.stack([u, v], axis=-1), front


def inside_image(uv: np.ndarray, cam: CameraParams) -> np.ndarray:
    """Strict 0 < u < W, 0 < v < H test."""

    W, H = cam.image_size
    return (uv[..., 0] > 0) & (uv[..., 0] < W) & (uv[..., 1] > 0) & (uv[..., 1] < H)


@dataclass(frozen=True)
class ProjectionResult:
    """Projection of N anchors' K points into one camera.

    Attributes:
        uv: [N, K, 2] pixel coordinates.
        front: [N, K] in-front flags.
        valid: [N] the validity bit f(q, v).
        rect: [N, 4] (x1, y1, x2, y2) bounding rectangle of in-front points clipped to the
            image; NaN rows when no point is in front.
        center_uv: [N, 2] projected box center.
        center_inside: [N] center in front and strictly inside the image.
    """

    uv: np.ndarray
    front: np.ndarray
    valid: np.ndarray
    rect: np.ndarray
    center_uv: np.ndarray
    center_inside: np.ndarray

    @property
    def truncated(self) -> np.ndarray:
        """Truncation indicator: center behind the camera or outside the image."""

        return ~self.center_inside

    @property
    def rect_area(self) -> np.ndarray:
        return np.nan_to_num((self.rect[:, 2] - self.rect[:, 0]) * (self.rect[:, 3] - self.rect[:, 1]))

    def reference_points(self) -> np.ndarray:
        """Projected center when it lies in the image, else the clipped rectangle center."""

        rect_center = np.stack(
            [(self.rect[:, 0] + self.rect[:, 2]) / 2.0, (self.rect[:, 1] + self.rect[:, 3]) / 2.0], axis=-1
        )
        return np.where(self.center_inside[:, None], self.center_uv, rect_center)


def project_anchors(
    anchors: np.ndarray,
    cam: CameraParams,
    strategy: AllocationStrategy = AllocationStrategy.CENTER_CORNERS,
) -> ProjectionResult:
    """Project anchors [N, 9] into `cam` using the strategy's point set."""

    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    W, H = cam.image_size
    uv, front = project_points(projection_points_array(anchors, strategy), cam)
    valid = (front & inside_image(uv, cam)).any(axis=1)

    big = np.inf
    xs = np.where(front, uv[..., 0], big)
    ys = np.where(front, uv[..., 1], big)
    xs_hi = np.where(front, uv[..., 0], -big)
    ys_hi = np.where(front, uv[..., 1], -big)
    any_front = front.any(axis=1)
    rect = np.stack(
        [
            np.clip(xs.min(axis=1), 0.0, W),
            np.clip(ys.min(axis=1), 0.0, H),
            np.clip(xs_hi.max(axis=1), 0.0, W),
            np.clip(ys_hi.max(axis=1), 0.0, H),
        ],
        axis=-1,
    )
    rect[~any_front] = np.nan

    center_uv, center_front = project_points(anchors[:, 0:3], cam)
    center_inside = center_front & inside_image(center_uv, cam)
    return ProjectionResult(
        uv=uv, front=front, valid=valid, rect=rect, center_uv=center_uv, center_inside=center_inside
    )


def project_anchor(
    anchor: Anchor3D,
    cam: CameraParams,
    strategy: AllocationStrategy = AllocationStrategy.CENTER_CORNERS,
) -> ProjectionResult:
    return project_anchors(anchor.as_array()[None], cam, strategy)


def validity(proj: ProjectionResult, cam: CameraParams) -> np.ndarray:
    """f(q, v): 1 iff some in-front projected point lies strictly inside the image."""

    return (proj.front & inside_image(proj.uv, cam)).any(axis=-1)


def bounding_rect(anchor: Anchor3D, cam: CameraParams) -> tuple[float, float, float, float] | None:
    """Clipped image rectangle of the anchor's 9 points, or None when it is not visible."""

    proj = project_anchor(anchor, cam)
    if not proj.valid[0]:
        return None
    x1, y1, x2, y2 = proj.rect[0]
    return float(x1), float(y1), float(x2), float(y2)
