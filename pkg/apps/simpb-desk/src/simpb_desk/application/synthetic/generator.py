# What it is: the synthetic data source that stands in for a driving dataset.
# A scene is a ring of V forward-ish cameras plus a few boxes placed on the ground inside
# the rig's field of view. 2D labels are not sampled: they are derived from the 3D boxes
# through the same projection code the model uses, so they can always be reproduced.
# Scenes are rejection-sampled until some object is visible in two cameras, because
# cross-camera objects are the case allocation and aggregation exist for.

import math

import numpy as np
from loguru import logger

from ...domain import (
    AllocationStrategy,
    Anchor3D,
    Box2D,
    CameraParams,
    GroundTruth2D,
    Scene,
    SceneGenConfig,
    SceneObject,
)
from ...exceptions import ConfigError, GeometryError
from ... import utils
from ..geometry import alpha_angle, camera_frame_yaw, compensate_anchors, ego_pose_delta, project_anchors

MAX_PLACEMENT_TRIES = 50
# keep object centers at least this far inside the rig's outer frustum edges (radians)
EDGE_MARGIN = math.radians(3.0)


def build_rig(config: SceneGenConfig) -> list[CameraParams]:
    return [
        CameraParams.from_mounting(
            math.radians(yaw), math.radians(config.hfov_deg), tuple(config.image_size), config.camera_height
        )
        for yaw in config.camera_yaws_deg
    ]


def _label_alpha(anchor: Anchor3D, cam: CameraParams, rect_center_u: float) -> float:
    try:
        return alpha_angle(anchor, cam)
    except GeometryError:
        # center behind the camera: measure the heading against the ray through the visible part
        ray = math.atan2(rect_center_u - cam.K[0, 2], cam.K[0, 0])
        return utils.wrap_angle(camera_frame_yaw(anchor.yaw, cam) - ray)


def derive_ground_truth(objects: list[SceneObject], rig: list[CameraParams]) -> list[GroundTruth2D]:
    """Per-camera 2D labels of every object visible in that camera (f = 1).

    The box is the clipped bounding rectangle of the object's 9 projected points; the
    truncation bit is set when the projected center is not inside the image.
    """
    if not objects:
        return []
    anchors = np.stack([obj.anchor.as_array() for obj in objects])
    labels = []
    for v, cam in enumerate(rig):
        proj = project_anchors(anchors, cam, AllocationStrategy.CENTER_CORNERS)
        for i, obj in enumerate(objects):
            if not proj.valid[i]:
                continue
            x1, y1, x2, y2 = (float(c) for c in proj.rect[i])
            labels.append(
                GroundTruth2D(
                    camera=v,
                    object_id=obj.object_id,
                    box=Box2D.from_corners(x1, y1, x2, y2, class_id=obj.class_id),
                    truncated=bool(proj.truncated[i]),
                    alpha=_label_alpha(obj.anchor, cam, (x1 + x2) / 2.0),
                )
            )
    return labels


def _footprint_radius(w: float, l: float) -> float:
    return 0.5 * math.hypot(w, l)


def _sample_objects(rng: np.random.Generator, config: SceneGenConfig, count: int) -> list[SceneObject]:
    half_fov = math.radians(config.hfov_deg) / 2.0
    az_lo = math.radians(min(config.camera_yaws_deg)) - half_fov + EDGE_MARGIN
    az_hi = math.radians(max(config.camera_yaws_deg)) + half_fov - EDGE_MARGIN
    near, far = config.depth_range

    objects: list[SceneObject] = []
    for object_id in range(count):
        for _ in range(MAX_PLACEMENT_TRIES):
            class_id = int(rng.integers(config.num_classes))
            spec = config.classes[class_id]
            jitter = 1.0 + spec.size_jitter * rng.uniform(-1.0, 1.0, size=3)
            w, l, h = (float(s) for s in np.asarray(spec.size) * jitter)
            azimuth = rng.uniform(az_lo, az_hi)
            depth = rng.uniform(near, far)
            yaw = rng.uniform(-math.pi, math.pi)
            speed = rng.uniform(0.0, spec.max_speed)
            x, y = depth * math.cos(azimuth), depth * math.sin(azimuth)
            if abs(x) > config.bev_range or abs(y) > config.bev_range:
                continue
            radius = _footprint_radius(w, l)
            if any(
                math.hypot(x - o.anchor.x, y - o.anchor.y) < radius + _footprint_radius(o.anchor.w, o.anchor.l)
                for o in objects
            ):
                continue
            anchor = Anchor3D(
                x=x, y=y, z=h / 2.0, w=w, l=l, h=h, yaw=yaw, vx=speed * math.cos(yaw), vy=speed * math.sin(yaw)
            )
            objects.append(SceneObject(object_id=object_id, class_id=class_id, anchor=anchor))
            break
    return objects


def _straddles(labels: list[GroundTruth2D]) -> bool:
    cameras: dict[int, set[int]] = {}
    for label in labels:
        cameras.setdefault(label.object_id, set()).add(label.camera)
    return any(len(v) >= 2 for v in cameras.values())


def generate_scene(seed: int, config: SceneGenConfig, scene_id: str | None = None) -> Scene:
    """Deterministic synthetic scene for `seed`.

    Raises:
        ConfigError: If a straddling object is required but no two frusta overlap, or
            if no acceptable scene is found within `max_attempts`.
    """
    if config.require_straddle and not config.has_frustum_overlap():
        raise ConfigError("require_straddle is set but no two camera frusta overlap")
    if config.require_straddle and config.object_count_range[1] == 0:
        raise ConfigError("require_straddle is set but scenes have no objects")

    rng = utils.make_rng(seed)
    rig = build_rig(config)
    lo, hi = config.object_count_range
    for attempt in range(config.max_attempts):
        count = int(rng.integers(lo, hi + 1))
        objects = _sample_objects(rng, config, count)
        if len(objects) != count:
            continue
        labels = derive_ground_truth(objects, rig)
        if config.require_straddle and not _straddles(labels):
            continue
        logger.debug(f"Scene seed={seed}: accepted after {attempt + 1} attempts with {count} objects")
        return Scene(
            scene_id=scene_id or f"scene-{seed:06d}",
            frame_interval=config.frame_interval,
            rig=rig,
            objects=objects,
            ground_truth_2d=labels,
        )
    raise ConfigError(f"no acceptable scene for seed {seed} within {config.max_attempts} attempts")


def next_frame(scene: Scene, config: SceneGenConfig, frame_index: int, sequence_id: str) -> Scene:
    """Advance a scene by one frame interval: objects move, the ego drives and turns.

    Objects that leave the BEV range are dropped.
    """
    dt = config.frame_interval
    delta = ego_pose_delta(config.ego_speed * dt, config.ego_yaw_rate * dt)
    objects = []
    if scene.objects:
        moved = compensate_anchors(np.stack([o.anchor.as_array() for o in scene.objects]), delta, dt)
        for obj, values in zip(scene.objects, moved):
            if abs(values[0]) > config.bev_range or abs(values[1]) > config.bev_range:
                continue
            objects.append(SceneObject(object_id=obj.object_id, class_id=obj.class_id, anchor=Anchor3D.from_array(values)))
    return Scene(
        scene_id=f"{sequence_id}-f{frame_index:02d}",
        sequence_id=sequence_id,
        frame_index=frame_index,
        frame_interval=dt,
        ego_pose_delta=delta.tolist(),
        rig=scene.rig,
        objects=objects,
        ground_truth_2d=derive_ground_truth(objects, scene.rig),
    )


def generate_sequence(seed: int, config: SceneGenConfig) -> list[Scene]:
    """`sequence_length` consecutive frames; the first frame follows `generate_scene`."""

    sequence_id = f"seq-{seed:06d}"
    first = generate_scene(seed, config, scene_id=f"{sequence_id}-f00")
    frames = [first.model_copy(update={"sequence_id": sequence_id})]
    for index in range(1, config.sequence_length):
        frames.append(next_frame(frames[-1], config, index, sequence_id))
    return frames


def scene_seeds(seed: int, count: int) -> list[int]:
    """Independent per-scene seeds derived from one run seed."""

    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count, dtype=np.uint32)]


def generate_scenes(seed: int, count: int, config: SceneGenConfig) -> list[Scene]:
    """`count` scenes (or `count` sequences of `sequence_length` frames), deterministic in `seed`."""

    scenes: list[Scene] = []
    for child in scene_seeds(seed, count):
        if config.sequence_length > 1:
            scenes.extend(generate_sequence(child, config))
        else:
            scenes.append(generate_scene(child, config))
    logger.info(f"Generated {len(scenes)} scenes from seed {seed}")
    return scenes
