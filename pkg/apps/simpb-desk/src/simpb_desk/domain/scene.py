# A Scene is the synthetic stand-in for one multi-camera frame: the rig, the 3D objects
# and the per-camera 2D labels derived from them (the same way 2D labels are generated
# from 3D labels on real driving data).

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .geometry import Anchor3D, Box2D, CameraParams

SCENE_SCHEMA_VERSION = 1


class SceneObject(BaseModel):
    model_config = ConfigDict(frozen=True)

    object_id: int
    class_id: int = Field(ge=0)
    anchor: Anchor3D


class GroundTruth2D(BaseModel):
    """One object's label in one camera: clipped projected rectangle plus truncation and alpha."""

    model_config = ConfigDict(frozen=True)

    camera: int = Field(ge=0)
    object_id: int
    box: Box2D
    truncated: bool
    alpha: float


class Scene(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: int = SCENE_SCHEMA_VERSION
    scene_id: str
    sequence_id: str | None = None
    frame_index: int = 0
    frame_interval: float = 0.5
    # previous-ego -> current-ego rigid transform (4x4); None for the first frame of a sequence
    ego_pose_delta: list[list[float]] | None = None
    rig: list[CameraParams]
    objects: list[SceneObject] = Field(default_factory=list)
    ground_truth_2d: list[GroundTruth2D] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_references(self) -> "Scene":
        ids = {obj.object_id for obj in self.objects}
        if len(ids) != len(self.objects):
            raise ValueError(f"scene {self.scene_id}: duplicate object ids")
        for label in self.ground_truth_2d:
            if label.object_id not in ids:
                raise ValueError(f"scene {self.scene_id}: 2D label references unknown object {label.object_id}")
            if label.camera >= len(self.rig):
                raise ValueError(f"scene {self.scene_id}: 2D label references camera {label.camera}")
        return self

    @property
    def num_cameras(self) -> int:
        return len(self.rig)

    def object_by_id(self, object_id: int) -> SceneObject:
        for obj in self.objects:
            if obj.object_id == object_id:
                return obj
        raise KeyError(object_id)

    def labels_for_camera(self, camera: int) -> list[GroundTruth2D]:
        return [label for label in self.ground_truth_2d if label.camera == camera]
