# What it is: the hybrid decoder.
# Each hybrid block runs, in order:
#   temporal cross-attention -> allocate 3D queries into per-camera 2D queries
#   -> L_2d x (group self-attention -> group deformable cross-attention -> FFN -> 2D head)
#   -> aggregation (gate, fuse, merge) -> optional auxiliary 3D head
#   -> temporal cross-attention -> L_3d x (self-attention -> multi-view deformable
#      cross-attention -> FFN -> 3D head, anchors refined)
# Anchors are numpy buffers: every 3D head refines them and the refined values are
# detached before the next layer reads them.

from dataclasses import dataclass, field

import numpy as np
from loguru import logger

from ...domain import CameraParams, ModelConfig
from ...exceptions import UsageError
from ..aggregation import AggregationOutput, QueryAggregation, fuse
from ..allocation import AllocationResult, allocate
from ..attention import (
    AttentionConfig,
    DeformableCrossAttention,
    GroupCrossAttention,
    GroupMask,
    GroupSelfAttention,
    TemporalCrossAttention,
)
from ..tensor import FeedForward, ParameterStore, Tensor, ops
from .anchors import AnchorEmbedding
from .heads import Head2D, Head3D, Predictions2D, Predictions3D
from .temporal import TemporalMemory


@dataclass
class DecoderState:
    """Everything a forward pass produces.

    Attributes:
        q3d: [N, C] current 3D queries.
        anchors: [N, 9] current anchors.
        memory: Temporal memory read by this pass.
        predictions_2d: One entry per 2D layer, in execution order.
        predictions_3d: One entry per 3D head application (auxiliary taps included).
        allocations: One allocation per hybrid block that ran 2D layers.
        aggregations: One aggregation output per hybrid block that ran 2D layers.
    """

    q3d: Tensor
    anchors: np.ndarray
    memory: TemporalMemory
    predictions_2d: list[Predictions2D] = field(default_factory=list)
    predictions_3d: list[Predictions3D] = field(default_factory=list)
    allocations: list[AllocationResult] = field(default_factory=list)
    aggregations: list[AggregationOutput] = field(default_factory=list)

    @property
    def final_3d(self) -> Predictions3D | None:
        return self.predictions_3d[-1] if self.predictions_3d else None

    @property
    def final_2d(self) -> Predictions2D | None:
        return self.predictions_2d[-1] if self.predictions_2d else None


class Decoder2DLayer:
    def __init__(self, store: ParameterStore, name: str, cfg: AttentionConfig, ffn_ratio: int) -> None:
        self.self_attn = GroupSelfAttention(store, f"{name}.self_attn", cfg)
        self.cross_attn = GroupCrossAttention(store, f"{name}.cross_attn", cfg)
        self.ffn = FeedForward(store, f"{name}.ffn", cfg.embed_dims, cfg.embed_dims * ffn_ratio)

    def __call__(
        self, q2d: Tensor, alloc: AllocationResult, mask: GroupMask, featmaps: list[Tensor], pos: Tensor
    ) -> Tensor:
        q2d = self.self_attn(q2d, mask, pos)
        q2d = self.cross_attn.forward_groups(q2d, alloc.reference_points, featmaps, alloc.mapping, pos)
        return self.ffn(q2d)


class Decoder3DLayer:
    """Self-attention over all 3D queries, then deformable sampling in every camera the
    anchor is valid in (averaged over those cameras), then an FFN."""

    def __init__(self, store: ParameterStore, name: str, cfg: AttentionConfig, ffn_ratio: int) -> None:
        self.self_attn = GroupSelfAttention(store, f"{name}.self_attn", cfg)
        self.cross_attn = DeformableCrossAttention(store, f"{name}.cross_attn", cfg)
        self.ffn = FeedForward(store, f"{name}.ffn", cfg.embed_dims, cfg.embed_dims * ffn_ratio)

    def __call__(
        self,
        q3d: Tensor,
        anchors: np.ndarray,
        featmaps: list[Tensor],
        rig: list[CameraParams],
        pos: Tensor,
        config: ModelConfig,
    ) -> Tensor:
        q3d = self.self_attn(q3d, GroupMask.from_group_sizes([q3d.shape[0]]), pos)
        alloc = allocate(q3d, anchors, rig, config)
        if alloc.mapping.num_2d:
            sampled = self.cross_attn.sample(
                alloc.q2d,
                alloc.reference_points,
                alloc.mapping.group_offsets,
                featmaps,
                ops.gather_rows(pos, alloc.mapping.owners),
            )
            q3d = ops.add(q3d, self.cross_attn.out_proj(fuse(sampled, alloc.mapping)))
        return self.ffn(q3d)


class HybridBlock:
    def __init__(self, store: ParameterStore, name: str, config: ModelConfig, cfg: AttentionConfig) -> None:
        self.temporal_2d = TemporalCrossAttention(store, f"{name}.temporal_2d", cfg) if config.num_layers_2d else None
        if config.num_layers_3d and config.temporal_shared_params and self.temporal_2d is not None:
            self.temporal_3d = self.temporal_2d
        elif config.num_layers_3d:
            self.temporal_3d = TemporalCrossAttention(store, f"{name}.temporal_3d", cfg)
        else:
            self.temporal_3d = None
        self.layers_2d = [
            Decoder2DLayer(store, f"{name}.layer2d.{i}", cfg, config.ffn_ratio) for i in range(config.num_layers_2d)
        ]
        self.aggregation = (
            QueryAggregation(store, f"{name}.aggregation", cfg.embed_dims, cfg.num_heads, config.merge_post_residual)
            if config.num_layers_2d
            else None
        )
        self.layers_3d = [
            Decoder3DLayer(store, f"{name}.layer3d.{i}", cfg, config.ffn_ratio) for i in range(config.num_layers_3d)
        ]


class HybridDecoder:
    """L_hybrid blocks of (L_2d 2D layers, aggregation, L_3d 3D layers) plus the shared heads."""

    def __init__(self, store: ParameterStore, name: str, config: ModelConfig, cfg: AttentionConfig, bev_range: float) -> None:
        self.config = config
        self.anchor_embed = AnchorEmbedding(store, f"{name}.anchor_embed", cfg.embed_dims, bev_range)
        self.blocks = [HybridBlock(store, f"{name}.block.{b}", config, cfg) for b in range(config.num_hybrid)]
        self.head_2d = Head2D(store, f"{name}.head_2d", cfg.embed_dims, config.num_classes, config.default_box_fraction)
        self.head_3d = Head3D(store, f"{name}.head_3d", cfg.embed_dims, config.num_classes)

    def __call__(self, featmaps: list[Tensor], state: DecoderState, rig: list[CameraParams]) -> DecoderState:
        config = self.config
        memory = state.memory
        memory_pos = self.anchor_embed(memory.anchors) if len(memory) else None
        q3d, anchors = state.q3d, state.anchors
        layer_2d = layer_3d = 0

        for block in self.blocks:
            pos3d = self.anchor_embed(anchors)
            if block.layers_2d:
                q3d = block.temporal_2d(q3d, memory.queries, pos3d, memory_pos)
                alloc = allocate(q3d, anchors, rig, config)
                logger.debug(f"2D queries per camera: {alloc.group_sizes.tolist()}")
                mask = GroupMask.from_group_sizes(alloc.group_sizes)
                pos2d = ops.gather_rows(pos3d, alloc.mapping.owners)
                q2d = alloc.q2d
                for layer in block.layers_2d:
                    q2d = layer(q2d, alloc, mask, featmaps, pos2d)
                    state.predictions_2d.append(
                        self.head_2d(q2d, alloc.reference_points, alloc.mapping, rig, layer=layer_2d)
                    )
                    layer_2d += 1
                agg = block.aggregation(q3d, q2d, alloc.truncation, alloc.mapping, pos3d)
                state.allocations.append(alloc)
                state.aggregations.append(agg)
                q3d = agg.q3d_agg
                if config.aux_supervision:
                    pred = self.head_3d(agg.aux_head_input, anchors, layer=layer_3d, aux=True)
                    state.predictions_3d.append(pred)
                    anchors = pred.anchors
                    pos3d = self.anchor_embed(anchors)
            if block.layers_3d:
                q3d = block.temporal_3d(q3d, memory.queries, pos3d, memory_pos)
                for layer in block.layers_3d:
                    q3d = layer(q3d, anchors, featmaps, rig, pos3d, config)
                    pred = self.head_3d(q3d, anchors, layer=layer_3d)
                    state.predictions_3d.append(pred)
                    anchors = pred.anchors
                    pos3d = self.anchor_embed(anchors)
                    layer_3d += 1

        state.q3d = q3d
        state.anchors = anchors
        return state


def decode_forward(
    decoder: HybridDecoder, featmaps: list[Tensor], state: DecoderState, rig: list[CameraParams]
) -> DecoderState:
    """Run every hybrid block on one frame and collect all-layer predictions."""

    if len(featmaps) != len(rig):
        raise UsageError(f"{len(featmaps)} feature maps for a rig of {len(rig)} cameras")
    return decoder(featmaps, state, rig)
