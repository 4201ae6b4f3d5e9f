from .config import AttentionConfig
from .group import (
    DeformableCrossAttention,
    GroupCrossAttention,
    GroupMask,
    GroupSelfAttention,
    group_cross_attention,
    group_self_attention,
)
from .temporal import TemporalCrossAttention, temporal_cross_attention

__all__ = [
    "AttentionConfig",
    "DeformableCrossAttention",
    "GroupCrossAttention",
    "GroupMask",
    "GroupSelfAttention",
    "TemporalCrossAttention",
    "group_cross_attention",
    "group_self_attention",
    "temporal_cross_attention",
]
