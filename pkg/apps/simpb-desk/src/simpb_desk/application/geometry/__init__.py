from .angles import alpha_angle, camera_frame_yaw, decode_angle, encode_angle
from .boxes import center_dist3d, cxcywh_to_xyxy, giou_matrix, iou2d, iou_matrix
from .motion import compensate_anchors, ego_pose_delta
from .projection import (
    ProjectionResult,
    bounding_rect,
    box_corners,
    box_corners_array,
    inside_image,
    project_anchor,
    project_anchors,
    project_points,
    projection_points,
    projection_points_array,
    to_camera_frame,
    validity,
)

__all__ = [
    "ProjectionResult",
    "alpha_angle",
    "bounding_rect",
    "box_corners",
    "box_corners_array",
    "camera_frame_yaw",
    "center_dist3d",
    "compensate_anchors",
    "cxcywh_to_xyxy",
    "decode_angle",
    "ego_pose_delta",
    "encode_angle",
    "giou_matrix",
    "inside_image",
    "iou2d",
    "iou_matrix",
    "project_anchor",
    "project_anchors",
    "project_points",
    "projection_points",
    "projection_points_array",
    "to_camera_frame",
    "validity",
]
