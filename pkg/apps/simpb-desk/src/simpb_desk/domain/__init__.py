from .detection import Detection2D, Detection3D, DetectionRecord
from .geometry import ANCHOR_FIELDS, Anchor3D, Box2D, CameraParams
from .run_config import AllocationStrategy, ClassSpec, ModelConfig, RasterConfig, RunConfig, SceneGenConfig
from .scene import GroundTruth2D, Scene, SceneObject

__all__ = [
    "ANCHOR_FIELDS",
    "AllocationStrategy",
    "Anchor3D",
    "Box2D",
    "CameraParams",
    "ClassSpec",
    "Detection2D",
    "Detection3D",
    "DetectionRecord",
    "GroundTruth2D",
    "ModelConfig",
    "RasterConfig",
    "RunConfig",
    "Scene",
    "SceneGenConfig",
    "SceneObject",
]
