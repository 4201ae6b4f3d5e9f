# Small building blocks shared by the attention, aggregation and head modules.
# Each layer registers its weights in a ParameterStore at construction and is applied
# by calling it, so a decoder is just a list of these objects.

import math

from . import ops
from .parameters import ParameterStore
from .tensor import Tensor


class Linear:
    def __init__(self, store: ParameterStore, name: str, d_in: int, d_out: int, init: str = "xavier", bias: bool = True) -> None:
        self.weight = store.create(f"{name}.weight", (d_in, d_out), init)
        self.bias = store.create(f"{name}.bias", (d_out,), "zeros") if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class LayerNorm:
    def __init__(self, store: ParameterStore, name: str, dim: int) -> None:
        self.gamma = store.create(f"{name}.gamma", (dim,), "ones")
        self.beta = store.create(f"{name}.beta", (dim,), "zeros")

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta)


class MLP:
    """Linear -> ReLU -> Linear."""

    def __init__(self, store: ParameterStore, name: str, d_in: int, hidden: int, d_out: int, final_init: str = "xavier") -> None:
        self.fc1 = Linear(store, f"{name}.fc1", d_in, hidden)
        self.fc2 = Linear(store, f"{name}.fc2", hidden, d_out, init=final_init)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(ops.relu(self.fc1(x)))


class FeedForward:
    """Pre-norm residual feed-forward block: x + MLP(LN(x))."""

    def __init__(self, store: ParameterStore, name: str, dim: int, hidden: int) -> None:
        self.norm = LayerNorm(store, f"{name}.norm", dim)
        self.mlp = MLP(store, f"{name}.mlp", dim, hidden, dim)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.add(x, self.mlp(self.norm(x)))


class MultiHeadAttention:
    """softmax(mask + Q K^T / sqrt(d_head)) V per head, then an output projection.

    The additive mask has shape [n_q, n_k] and is shared by every head.
    """

    def __init__(self, store: ParameterStore, name: str, dim: int, num_heads: int) -> None:
        self.dim = dim
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.q_proj = Linear(store, f"{name}.q", dim, dim)
        self.k_proj = Linear(store, f"{name}.k", dim, dim)
        self.v_proj = Linear(store, f"{name}.v", dim, dim)
        self.out_proj = Linear(store, f"{name}.out", dim, dim)

    def _split_heads(self, x: Tensor) -> Tensor:
        # [n, C] -> [heads, n, d]
        return ops.transpose(ops.reshape(x, (x.shape[0], self.num_heads, self.head_dim)), (1, 0, 2))

    def attention_weights(self, query: Tensor, key: Tensor, mask=None) -> Tensor:
        q = self._split_heads(self.q_proj(query))
        k = self._split_heads(self.k_proj(key))
        logits = ops.mul(ops.matmul(q, ops.swap_last(k)), 1.0 / math.sqrt(self.head_dim))
        return ops.masked_softmax(logits, mask)

    def __call__(self, query: Tensor, key: Tensor, value: Tensor, mask=None) -> Tensor:
        weights = self.attention_weights(query, key, mask)
        v = self._split_heads(self.v_proj(value))
        mixed = ops.matmul(weights, v)  # [heads, n_q, d]
        merged = ops.reshape(ops.transpose(mixed, (1, 0, 2)), (query.shape[0], self.dim))
        return self.out_proj(merged)
