from ...domain import DetectionRecord, Scene
from ...exceptions import DataError


def pair_records(records: list[DetectionRecord], scenes: list[Scene]) -> list[tuple[DetectionRecord, Scene]]:
    """Line detection records up with their scenes; scenes without a record get an empty one.

    Raises:
        DataError: If a record names a scene that is not in `scenes`, or a scene has two records.
    """
    by_id: dict[str, DetectionRecord] = {}
    scene_ids = {scene.scene_id for scene in scenes}
    for record in records:
        if record.scene_id not in scene_ids:
            raise DataError(f"detections reference unknown scene {record.scene_id!r}")
        if record.scene_id in by_id:
            raise DataError(f"scene {record.scene_id!r} has more than one detection record")
        by_id[record.scene_id] = record
    return [(by_id.get(scene.scene_id, DetectionRecord(scene_id=scene.scene_id)), scene) for scene in scenes]


def filter_by_score(record: DetectionRecord, threshold: float) -> DetectionRecord:
    """Drop 3D and 2D detections scoring below `threshold`."""

    if threshold <= 0.0:
        return record
    return record.model_copy(
        update={
            "detections_3d": [d for d in record.detections_3d if d.score >= threshold],
            "detections_2d": [d for d in record.detections_2d if d.score >= threshold],
        }
    )
