from .mapping import (
    AllocationResult,
    MappingMatrix,
    allocate,
    apply_caps,
    build_mapping,
    clamp_anchors,
    project_rig,
)

__all__ = [
    "AllocationResult",
    "MappingMatrix",
    "allocate",
    "apply_caps",
    "build_mapping",
    "clamp_anchors",
    "project_rig",
]
