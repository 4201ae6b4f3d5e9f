# What it is: Dynamic Query Allocation.
# Each 3D query's anchor is projected into every camera; the query gets one 2D query in
# every camera where some projected point lands inside the image. The 3D-to-2D mapping
# matrix T (N x M, one 1 per column) is kept sparse as two integer arrays, owner and
# camera, with the 2D queries grouped by camera in ascending camera order.

from dataclasses import dataclass, field

import numpy as np
from loguru import logger

from ...domain import AllocationStrategy, CameraParams, ModelConfig
from ...exceptions import UsageError
from ..geometry import ProjectionResult, project_anchors, project_points
from ..tensor import Tensor, ops


@dataclass(frozen=True)
class MappingMatrix:
    """Sparse 3D-to-2D mapping.

    Attributes:
        num_queries: N, the number of 3D queries (rows of T).
        owners: [M] owning 3D query of each 2D query (the row holding the column's 1).
        cameras: [M] camera of each 2D query; non-decreasing.
        group_offsets: [V + 1] start of each camera group in the column order.
    """

    num_queries: int
    owners: np.ndarray
    cameras: np.ndarray
    group_offsets: np.ndarray

    @property
    def num_2d(self) -> int:
        return int(self.owners.shape[0])

    @property
    def num_cameras(self) -> int:
        return int(self.group_offsets.shape[0] - 1)

    @property
    def group_sizes(self) -> np.ndarray:
        return np.diff(self.group_offsets)

    def group_slice(self, camera: int) -> slice:
        return slice(int(self.group_offsets[camera]), int(self.group_offsets[camera + 1]))

    def owned_counts(self) -> np.ndarray:
        """Row sums of T: number of 2D queries each 3D query owns."""

        return np.bincount(self.owners, minlength=self.num_queries)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.num_queries, self.num_2d))
        dense[self.owners, np.arange(self.num_2d)] = 1.0
        return dense

    def gather(self, q3d: np.ndarray) -> np.ndarray:
        """T^T Y for dense numpy Y [N, C]."""

        return np.asarray(q3d)[self.owners]

    def scatter(self, q2d: np.ndarray) -> np.ndarray:
        """T X for dense numpy X [M, C]."""

        out = np.zeros((self.num_queries,) + np.asarray(q2d).shape[1:])
        np.add.at(out, self.owners, q2d)
        return out

    def to_json_dict(self) -> dict:
        return {
            "N": self.num_queries,
            "M": self.num_2d,
            "group_sizes": self.group_sizes.tolist(),
            "columns": [
                {"column": j, "owner": int(o), "camera": int(c)}
                for j, (o, c) in enumerate(zip(self.owners, self.cameras))
            ],
        }

    @classmethod
    def from_groups(cls, num_queries: int, groups: list[np.ndarray]) -> "MappingMatrix":
        owners = np.concatenate([np.asarray(g, dtype=np.int64) for g in groups]) if groups else np.zeros(0, np.int64)
        cameras = np.concatenate([np.full(len(g), v, dtype=np.int64) for v, g in enumerate(groups)]) if groups else np.zeros(0, np.int64)
        offsets = np.concatenate([[0], np.cumsum([len(g) for g in groups])]).astype(np.int64)
        return cls(num_queries=num_queries, owners=owners, cameras=cameras, group_offsets=offsets)


@dataclass(frozen=True)
class AllocationResult:
    """2D queries built from 3D queries for one decoder layer.

    Attributes:
        mapping: The (capped) mapping matrix.
        q2d: [M, C] gathered queries (row j is q3d[owner(j)]).
        reference_points: [M, 2] pixel reference of each 2D query, inside its image.
        truncation: [M] bool, 1 when the projected center is outside / behind the camera.
    """

    mapping: MappingMatrix
    q2d: Tensor
    reference_points: np.ndarray
    truncation: np.ndarray
    projections: list[ProjectionResult] = field(default_factory=list, repr=False)

    @property
    def group_sizes(self) -> np.ndarray:
        return self.mapping.group_sizes


def clamp_anchors(anchors: np.ndarray, max_lw: float = 35.0, max_h: float = 10.0) -> np.ndarray:
    """Projection-time copy with w, l <= max_lw and h <= max_h; the input is not touched."""

    clamped = np.array(anchors, dtype=np.float64, copy=True)
    clamped[:, 3] = np.minimum(clamped[:, 3], max_lw)
    clamped[:, 4] = np.minimum(clamped[:, 4], max_lw)
    clamped[:, 5] = np.minimum(clamped[:, 5], max_h)
    return clamped


def project_rig(
    anchors: np.ndarray, rig: list[CameraParams], strategy: AllocationStrategy
) -> list[ProjectionResult]:
    return [project_anchors(anchors, cam, strategy) for cam in rig]


def build_mapping(
    anchors: np.ndarray,
    rig: list[CameraParams],
    strategy: AllocationStrategy = AllocationStrategy.CENTER_CORNERS,
    projections: list[ProjectionResult] | None = None,
) -> MappingMatrix:
    """Build T by keeping, per camera, the diagonal columns whose query is valid there.

    Args:
        anchors: [N, 9] anchors, already clamped.
        rig: Cameras in index order.
        strategy: Which anchor points are projected.
        projections: Optional precomputed per-camera projections of `anchors`.

    Returns:
        MappingMatrix: Columns grouped by camera, ascending 3D index inside each group.
    """
    anchors = np.atleast_2d(anchors)
    n = anchors.shape[0]
    if strategy == AllocationStrategy.UNIFORM:
        owners = np.arange(n)
        return MappingMatrix.from_groups(n, [owners[owners % len(rig) == v] for v in range(len(rig))])
    if projections is None:
        projections = project_rig(anchors, rig, strategy)
    groups = [np.flatnonzero(proj.valid) for proj in projections]
    mapping = MappingMatrix.from_groups(n, groups)
    logger.debug(f"Allocated {mapping.num_2d} 2D queries from {n} 3D queries, groups {mapping.group_sizes.tolist()}")
    return mapping


def apply_caps(
    mapping: MappingMatrix,
    anchors: np.ndarray,
    rig: list[CameraParams],
    cap: int = 100,
    strategy: AllocationStrategy = AllocationStrategy.CENTER_CORNERS,
    projections: list[ProjectionResult] | None = None,
) -> MappingMatrix:
    """Limit truncated (projection-center) 2D queries to `cap` per camera group.

    Excess truncated queries are evicted smallest projected-rectangle area first; among
    equal areas the lower 3D-query index is kept. Center queries are never evicted.
    """
    if strategy == AllocationStrategy.UNIFORM:
        return mapping
    if projections is None:
        projections = project_rig(np.atleast_2d(anchors), rig, strategy)

    groups = []
    for v, proj in enumerate(projections):
        members = mapping.owners[mapping.group_slice(v)]
        truncated = members[proj.truncated[members]]
        if len(truncated) <= cap:
            groups.append(members)
            continue
        areas = proj.rect_area[truncated]
        order = np.lexsort((-truncated, areas))  # primary: area, secondary: higher query index first
        evicted = set(truncated[order[: len(truncated) - cap]].tolist())
        logger.debug(f"Camera {v}: evicting {len(evicted)} truncated 2D queries over the cap of {cap}")
        groups.append(np.array([q for q in members if q not in evicted], dtype=np.int64))
    return MappingMatrix.from_groups(mapping.num_queries, groups)


def _uniform_references(anchors: np.ndarray, mapping: MappingMatrix, rig: list[CameraParams]) -> tuple[np.ndarray, np.ndarray]:
    refs = np.zeros((mapping.num_2d, 2))
    truncation = np.ones(mapping.num_2d, dtype=bool)
    for j, (owner, v) in enumerate(zip(mapping.owners, mapping.cameras)):
        cam = rig[v]
        W, H = cam.image_size
        uv, front = project_points(anchors[owner, 0:3], cam)
        if front:
            refs[j] = np.clip(uv, [0.0, 0.0], [W, H])
            truncation[j] = not (0 < uv[0] < W and 0 < uv[1] < H)
        else:
            refs[j] = (W / 2.0, H / 2.0)
    return refs, truncation


def allocate(
    q3d: Tensor,
    anchors: np.ndarray,
    rig: list[CameraParams],
    config: ModelConfig | None = None,
) -> AllocationResult:
    """Q2d = T^T Q3d plus reference points and truncation bits for every 2D query.

    Raises:
        UsageError: If q3d and anchors disagree on N.
    """
    config = config or ModelConfig(num_cameras=len(rig))
    anchors = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    if q3d.ndim != 2 or q3d.shape[0] != anchors.shape[0]:
        raise UsageError(f"allocate: q3d has shape {q3d.shape} but there are {anchors.shape[0]} anchors")

    strategy = config.allocation_strategy
    clamped = clamp_anchors(anchors, config.anchor_max_lw, config.anchor_max_h)
    projections = [] if strategy == AllocationStrategy.UNIFORM else project_rig(clamped, rig, strategy)
    mapping = build_mapping(clamped, rig, strategy, projections=projections or None)
    mapping = apply_caps(mapping, clamped, rig, config.truncated_cap_per_camera, strategy, projections=projections or None)

    if strategy == AllocationStrategy.UNIFORM:
        refs, truncation = _uniform_references(clamped, mapping, rig)
    else:
        refs = np.zeros((mapping.num_2d, 2))
        truncation = np.zeros(mapping.num_2d, dtype=bool)
        for v, proj in enumerate(projections):
            sl = mapping.group_slice(v)
            members = mapping.owners[sl]
            refs[sl] = proj.reference_points()[members]
            truncation[sl] = proj.truncated[members]

    q2d = ops.gather_rows(q3d, mapping.owners)
    return AllocationResult(
        mapping=mapping, q2d=q2d, reference_points=refs, truncation=truncation, projections=projections
    )
