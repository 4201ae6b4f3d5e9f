from ..tensor import LayerNorm, MultiHeadAttention, ParameterStore, Tensor, ops
from .config import AttentionConfig


class TemporalCrossAttention:
    """Cross-attention of current queries over propagated history queries.

    Empty memory (first frame) leaves the queries untouched.
    """

    def __init__(self, store: ParameterStore, name: str, cfg: AttentionConfig) -> None:
        self.norm = LayerNorm(store, f"{name}.norm", cfg.embed_dims)
        self.attn = MultiHeadAttention(store, f"{name}.attn", cfg.embed_dims, cfg.num_heads)

    def __call__(
        self,
        q: Tensor,
        memory: Tensor | None,
        q_pos: Tensor | None = None,
        memory_pos: Tensor | None = None,
    ) -> Tensor:
        if memory is None or memory.shape[0] == 0 or q.shape[0] == 0:
            return q
        x = self.norm(q)
        query = x if q_pos is None else ops.add(x, q_pos)
        key = memory if memory_pos is None else ops.add(memory, memory_pos)
        return ops.add(q, self.attn(query, key, memory))


def temporal_cross_attention(
    q: Tensor,
    memory: Tensor | None,
    layer: TemporalCrossAttention,
    q_pos: Tensor | None = None,
    memory_pos: Tensor | None = None,
) -> Tensor:
    return layer(q, memory, q_pos, memory_pos)
