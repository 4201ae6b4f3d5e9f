# Detection dump records: one JSONL line per scene. 2D detections carry the id of the 3D
# detection they were allocated from, which is what the association metric consumes.

from pydantic import BaseModel, ConfigDict, Field, model_validator

DETECTION_SCHEMA_VERSION = 1


class Detection3D(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    id: int
    anchor: tuple[float, float, float, float, float, float, float, float, float]
    class_id: int = Field(alias="class", ge=0)
    score: float = Field(ge=0.0, le=1.0)


class Detection2D(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    id: int
    camera: int = Field(ge=0)
    cx: float
    cy: float
    w: float = Field(ge=0)
    h: float = Field(ge=0)
    class_id: int = Field(alias="class", ge=0)
    score: float = Field(ge=0.0, le=1.0)
    linked_3d_id: int


class DetectionRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: int = DETECTION_SCHEMA_VERSION
    scene_id: str
    detections_3d: list[Detection3D] = Field(default_factory=list)
    detections_2d: list[Detection2D] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_links(self) -> "DetectionRecord":
        # one 2D detection per (camera, 3D id): the association metric relies on it
        seen: set[tuple[int, int]] = set()
        for det in self.detections_2d:
            key = (det.camera, det.linked_3d_id)
            if key in seen:
                raise ValueError(
                    f"scene {self.scene_id}: more than one 2D detection links 3D id "
                    f"{det.linked_3d_id} in camera {det.camera}"
                )
            seen.add(key)
        return self

    def linked_2d(self, camera: int, det3d_id: int) -> Detection2D | None:
        for det in self.detections_2d:
            if det.camera == camera and det.linked_3d_id == det3d_id:
                return det
        return None
