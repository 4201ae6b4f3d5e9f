# What it is: Adaptive Query Aggregation.
# After the 2D layers, every 2D query is gated by its truncation bit, averaged back onto
# the 3D query that owns it, and the result is merged into the 3D queries with a
# self-attention. A 3D query that owns no 2D query receives a zero fused row.

from dataclasses import dataclass

import numpy as np

from ...exceptions import UsageError
from ..allocation import MappingMatrix
from ..tensor import MLP, LayerNorm, MultiHeadAttention, ParameterStore, Tensor, ops


@dataclass(frozen=True)
class AggregationOutput:
    """Result of one aggregation step.

    Attributes:
        q3d_agg: [N, C] merged 3D queries, fed to the next 3D layer.
        fused: [N, C] mapping-normalised 2D features before the merge.
        aux_head_input: [N, C] tap for the auxiliary 3D head (same tensor as q3d_agg).
    """

    q3d_agg: Tensor
    fused: Tensor
    aux_head_input: Tensor


class TruncationGate:
    """sigmoid(MLP([q2d, trunc])) with MLP: C + 1 -> C -> C."""

    def __init__(self, store: ParameterStore, name: str, dim: int) -> None:
        self.mlp = MLP(store, f"{name}.mlp", dim + 1, dim, dim)

    def gate(self, q2d: Tensor, truncation: np.ndarray) -> Tensor:
        bits = np.asarray(truncation, dtype=np.float64).reshape(-1, 1)
        if bits.shape[0] != q2d.shape[0]:
            raise UsageError(f"{bits.shape[0]} truncation bits for {q2d.shape[0]} 2D queries")
        return ops.sigmoid(self.mlp(ops.concat([q2d, bits], axis=1)))

    def __call__(self, q2d: Tensor, truncation: np.ndarray) -> Tensor:
        return ops.mul(q2d, self.gate(q2d, truncation))


def gate_truncation(q2d: Tensor, truncation: np.ndarray, gate: TruncationGate) -> Tensor:
    return gate(q2d, truncation)


def fuse(q2d_gated: Tensor, mapping: MappingMatrix) -> Tensor:
    """T X / rowsum(T): the mean of the 2D queries each 3D query owns, zero when none."""

    if q2d_gated.shape[0] != mapping.num_2d:
        raise UsageError(f"fuse: {q2d_gated.shape[0]} rows for a mapping with {mapping.num_2d} columns")
    counts = mapping.owned_counts().astype(np.float64)
    inv = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)
    summed = ops.segment_sum(q2d_gated, mapping.owners, mapping.num_queries)
    return ops.mul(summed, np.broadcast_to(inv[:, None], summed.shape))


class QueryMerge:
    """Self-attention over q3d + fused, with an optional skip around the attention."""

    def __init__(self, store: ParameterStore, name: str, dim: int, num_heads: int, post_residual: bool = True) -> None:
        self.norm = LayerNorm(store, f"{name}.norm", dim)
        self.attn = MultiHeadAttention(store, f"{name}.attn", dim, num_heads)
        self.post_residual = post_residual

    def __call__(self, q3d: Tensor, fused: Tensor, pos: Tensor | None = None) -> Tensor:
        if q3d.shape != fused.shape:
            raise UsageError(f"merge: q3d {q3d.shape} and fused {fused.shape} differ")
        x = ops.add(q3d, fused)
        h = self.norm(x)
        qk = h if pos is None else ops.add(h, pos)
        out = self.attn(qk, qk, h)
        return ops.add(x, out) if self.post_residual else out


def merge(q3d: Tensor, fused: Tensor, layer: QueryMerge, pos: Tensor | None = None) -> Tensor:
    return layer(q3d, fused, pos)


class QueryAggregation:
    """gate -> fuse -> merge for one hybrid block."""

    def __init__(self, store: ParameterStore, name: str, dim: int, num_heads: int, post_residual: bool = True) -> None:
        self.gate = TruncationGate(store, f"{name}.gate", dim)
        self.merge = QueryMerge(store, f"{name}.merge", dim, num_heads, post_residual)

    def __call__(
        self,
        q3d: Tensor,
        q2d: Tensor,
        truncation: np.ndarray,
        mapping: MappingMatrix,
        pos: Tensor | None = None,
    ) -> AggregationOutput:
        fused = fuse(self.gate(q2d, truncation), mapping)
        q3d_agg = self.merge(q3d, fused, pos)
        return AggregationOutput(q3d_agg=q3d_agg, fused=fused, aux_head_input=q3d_agg)
