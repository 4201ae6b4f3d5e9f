from . import ops
from .gradcheck import finite_diff_check
from .layers import MLP, FeedForward, LayerNorm, Linear, MultiHeadAttention
from .ops import (
    bilinear_sample,
    layer_norm,
    linear,
    masked_softmax,
    matmul,
)
from .parameters import ParameterStore
from .tensor import Tape, Tensor, as_tensor, backward, current_tape, zero_grad

__all__ = [
    "MLP",
    "FeedForward",
    "LayerNorm",
    "Linear",
    "MultiHeadAttention",
    "ParameterStore",
    "Tape",
    "Tensor",
    "as_tensor",
    "backward",
    "bilinear_sample",
    "current_tape",
    "finite_diff_check",
    "layer_norm",
    "linear",
    "masked_softmax",
    "matmul",
    "ops",
    "zero_grad",
]
