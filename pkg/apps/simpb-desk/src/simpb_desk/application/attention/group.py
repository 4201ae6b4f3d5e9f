# Query-group attention: 2D queries only talk to queries of the same camera, and only
# sample the feature map of their own camera.

from dataclasses import dataclass

import numpy as np

from ...exceptions import UsageError
from ..allocation import MappingMatrix
from ..tensor import LayerNorm, Linear, MultiHeadAttention, ParameterStore, Tensor, ops
from .config import AttentionConfig


@dataclass(frozen=True)
class GroupMask:
    """Additive M x M mask: 0 inside a camera group, -inf across groups."""

    values: np.ndarray
    group_sizes: tuple[int, ...]

    @classmethod
    def from_group_sizes(cls, group_sizes) -> "GroupMask":
        sizes = tuple(int(s) for s in group_sizes)
        labels = np.repeat(np.arange(len(sizes)), sizes)
        same = labels[:, None] == labels[None, :]
        return cls(values=np.where(same, 0.0, -np.inf), group_sizes=sizes)

    @property
    def size(self) -> int:
        return int(self.values.shape[0])


class GroupSelfAttention:
    """Pre-norm masked self-attention over 2D queries: q + MHA(LN(q) + pos, mask)."""

    def __init__(self, store: ParameterStore, name: str, cfg: AttentionConfig) -> None:
        self.norm = LayerNorm(store, f"{name}.norm", cfg.embed_dims)
        self.attn = MultiHeadAttention(store, f"{name}.attn", cfg.embed_dims, cfg.num_heads)

    def __call__(self, q2d: Tensor, mask: GroupMask, pos: Tensor | None = None) -> Tensor:
        if mask.size != q2d.shape[0]:
            raise UsageError(f"group mask is {mask.size}x{mask.size} but there are {q2d.shape[0]} 2D queries")
        if q2d.shape[0] == 0:
            return q2d
        x = self.norm(q2d)
        qk = x if pos is None else ops.add(x, pos)
        return ops.add(q2d, self.attn(qk, qk, x, mask.values))


class DeformableCrossAttention:
    """Single-scale deformable attention around per-query reference points.

    Each query predicts P pixel offsets and P weights; it samples the value-projected
    feature map of its own camera at reference + offset and mixes the samples with the
    softmaxed weights. Offsets start at zero, so an untrained layer samples exactly at
    the reference point.
    """

    def __init__(self, store: ParameterStore, name: str, cfg: AttentionConfig) -> None:
        self.cfg = cfg
        C, P = cfg.embed_dims, cfg.num_points
        self.norm = LayerNorm(store, f"{name}.norm", C)
        self.value_proj = Linear(store, f"{name}.value", C, C)
        self.offset_proj = Linear(store, f"{name}.offset", C, P * 2, init="zeros")
        self.weight_proj = Linear(store, f"{name}.weight", C, P, init="zeros")
        self.out_proj = Linear(store, f"{name}.out", C, C)

    def sample(
        self,
        queries: Tensor,
        reference_points: np.ndarray,
        group_offsets: np.ndarray,
        featmaps: list[Tensor | None],
        pos: Tensor | None = None,
    ) -> Tensor:
        """Sampled features [M, C] before the output projection and residual."""

        M = queries.shape[0]
        C, P = self.cfg.embed_dims, self.cfg.num_points
        x = self.norm(queries)
        if pos is not None:
            x = ops.add(x, pos)
        offsets = ops.reshape(self.offset_proj(x), (M, P, 2))
        weights = ops.reshape(ops.softmax(self.weight_proj(x)), (M, 1, P))

        outputs = []
        for camera in range(len(group_offsets) - 1):
            start, stop = int(group_offsets[camera]), int(group_offsets[camera + 1])
            if stop == start:
                continue
            featmap = featmaps[camera] if camera < len(featmaps) else None
            if featmap is None:
                raise UsageError(f"camera {camera} has {stop - start} queries but no feature map")
            rows = np.arange(start, stop)
            value = self.value_proj(featmap)  # [Hf, Wf, C]
            # image pixels -> feature cells: cell (i, j) covers pixels [j*s, (j+1)*s)
            base = reference_points[start:stop] / self.cfg.stride - 0.5
            base = np.broadcast_to(base[:, None, :], (stop - start, P, 2))
            points = ops.add(ops.mul(ops.gather_rows(offsets, rows), 1.0 / self.cfg.stride), base)
            samples = ops.bilinear_sample(value, ops.reshape(points, ((stop - start) * P, 2)))
            mixed = ops.matmul(ops.gather_rows(weights, rows), ops.reshape(samples, (stop - start, P, C)))
            outputs.append(ops.reshape(mixed, (stop - start, C)))
        return ops.concat(outputs, axis=0)

    def __call__(
        self,
        queries: Tensor,
        reference_points: np.ndarray,
        group_offsets: np.ndarray,
        featmaps: list[Tensor | None],
        pos: Tensor | None = None,
    ) -> Tensor:
        if queries.shape[0] == 0:
            return queries
        sampled = self.sample(queries, reference_points, group_offsets, featmaps, pos)
        return ops.add(queries, self.out_proj(sampled))


class GroupCrossAttention(DeformableCrossAttention):
    """Deformable cross-attention of 2D queries, grouped by the mapping's cameras."""

    def forward_groups(
        self,
        q2d: Tensor,
        reference_points: np.ndarray,
        featmaps: list[Tensor | None],
        mapping: MappingMatrix,
        pos: Tensor | None = None,
    ) -> Tensor:
        if q2d.shape[0] != mapping.num_2d:
            raise UsageError(f"{q2d.shape[0]} 2D queries but the mapping has {mapping.num_2d} columns")
        return self(q2d, reference_points, mapping.group_offsets, featmaps, pos)


def group_self_attention(q2d: Tensor, mask: GroupMask, layer: GroupSelfAttention, pos: Tensor | None = None) -> Tensor:
    return layer(q2d, mask, pos)


def group_cross_attention(
    q2d: Tensor,
    reference_points: np.ndarray,
    featmaps: list[Tensor | None],
    mapping: MappingMatrix,
    layer: GroupCrossAttention,
    pos: Tensor | None = None,
) -> Tensor:
    return layer.forward_groups(q2d, reference_points, featmaps, mapping, pos)
