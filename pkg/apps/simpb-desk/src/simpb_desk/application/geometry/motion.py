# Rigid ego motion between consecutive frames.
# A pose delta is the 4x4 transform taking previous-ego coordinates to current-ego
# coordinates. Moving an anchor into the next frame means advancing it by its own
# velocity and then applying the delta to its center, heading and velocity.

import numpy as np


def ego_pose_delta(distance: float, yaw_change: float) -> np.ndarray:
    """Delta for an ego that drove `distance` meters along its x axis, then turned `yaw_change`.

    A point p in the previous frame lands at R(-yaw_change) (p - [distance, 0, 0]).
    """
    c, s = np.cos(-yaw_change), np.sin(-yaw_change)
    R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = -R @ np.array([distance, 0.0, 0.0])
    return T


def compensate_anchors(anchors: np.ndarray, pose_delta: np.ndarray | None, dt: float = 0.0) -> np.ndarray:
    """Advance anchors by v * dt, then map them through `pose_delta`.

    Args:
        anchors: [K, 9] anchors in the previous ego frame.
        pose_delta: 4x4 previous-ego -> current-ego transform, or None for a static ego.
        dt: Seconds between the two frames.

    Returns:
        np.ndarray: [K, 9] anchors in the current ego frame.
    """
    out = np.array(anchors, dtype=np.float64, copy=True).reshape(-1, 9)
    out[:, 0:2] += out[:, 7:9] * dt
    if pose_delta is None:
        return out
    T = np.asarray(pose_delta, dtype=np.float64)
    R, t = T[:3, :3], T[:3, 3]
    out[:, 0:3] = out[:, 0:3] @ R.T + t
    yaw = out[:, 6] + np.arctan2(R[1, 0], R[0, 0])
    yaw = np.arctan2(np.sin(yaw), np.cos(yaw))
    out[:, 6] = np.where(yaw <= -np.pi, yaw + 2.0 * np.pi, yaw)
    out[:, 7:9] = out[:, 7:9] @ R[:2, :2].T
    return out
