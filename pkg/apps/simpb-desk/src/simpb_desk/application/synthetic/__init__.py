from .generator import (
    build_rig,
    derive_ground_truth,
    generate_scene,
    generate_scenes,
    generate_sequence,
    next_frame,
    scene_seeds,
)
from .rasterizer import rasterize_array, rasterize_features, rasterize_scene

__all__ = [
    "build_rig",
    "derive_ground_truth",
    "generate_scene",
    "generate_scenes",
    "generate_sequence",
    "next_frame",
    "rasterize_array",
    "rasterize_features",
    "rasterize_scene",
    "scene_seeds",
]
