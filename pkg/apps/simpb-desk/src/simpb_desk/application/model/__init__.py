from .anchors import (
    AnchorEmbedding,
    PatchEmbedding,
    decode_anchor,
    decode_anchors,
    encode_anchor,
    encode_anchors,
    initial_anchors,
    normalized_encoding,
)
from .decoder import DecoderState, HybridDecoder, decode_forward
from .detector import SimPBDetector, detect_scenes, follows
from .heads import Head2D, Head3D, Predictions2D, Predictions3D, predict_heads
from .losses import LossBreakdown, SceneTargets, alpha_loss, compute_losses, giou_loss
from .matching import Assignment, cost_matrix_2d, cost_matrix_3d, hungarian_match
from .optimizer import AdamW
from .temporal import TemporalMemory, propagate_temporal, select_top_k
from .trainer import NonFiniteLossError, StepResult, Trainer, TrainingSample, train_step

__all__ = [
    "AdamW",
    "AnchorEmbedding",
    "Assignment",
    "DecoderState",
    "Head2D",
    "Head3D",
    "HybridDecoder",
    "LossBreakdown",
    "NonFiniteLossError",
    "PatchEmbedding",
    "Predictions2D",
    "Predictions3D",
    "SceneTargets",
    "SimPBDetector",
    "StepResult",
    "TemporalMemory",
    "Trainer",
    "TrainingSample",
    "alpha_loss",
    "compute_losses",
    "cost_matrix_2d",
    "cost_matrix_3d",
    "decode_anchor",
    "decode_anchors",
    "decode_forward",
    "detect_scenes",
    "encode_anchor",
    "encode_anchors",
    "follows",
    "giou_loss",
    "hungarian_match",
    "initial_anchors",
    "normalized_encoding",
    "predict_heads",
    "propagate_temporal",
    "select_top_k",
    "train_step",
]
