"""
Multi-head attention layers and the score-storage counter.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from apps.core.exceptions import DimensionError
from apps.tensor_core import ops
from apps.tensor_core.nn import Linear, Module
from apps.tensor_core.tensor import Tensor


@dataclass
class AttentionStats:
    """
    Counts attention calls and the score-matrix entries they allocate.

    Entries are counted per call as ``L_query * L_key``, independent of the
    folded batch and head extents.
    """

    calls: int = 0
    score_entries: list[int] = field(default_factory=list)

    def record(self, query_len: int, key_len: int) -> None:
        self.calls += 1
        self.score_entries.append(query_len * key_len)

    @property
    def total_entries(self) -> int:
        return sum(self.score_entries)

    def reset(self) -> None:
        self.calls = 0
        self.score_entries.clear()


class MultiHeadAttention(Module):
    """Scaled dot-product attention with separate query, key, value and output maps."""

    def __init__(self, embed_dim: int, heads: int, rng: np.random.Generator) -> None:
        if embed_dim % heads:
            raise DimensionError(f'embed_dim {embed_dim} is not divisible by heads {heads}')
        self.embed_dim = embed_dim
        self.heads = heads
        self.query = Linear(embed_dim, embed_dim, rng)
        self.key = Linear(embed_dim, embed_dim, rng)
        self.value = Linear(embed_dim, embed_dim, rng)
        self.out = Linear(embed_dim, embed_dim, rng)

    def _split(self, x: Tensor) -> Tensor:
        batch, length, _ = x.shape
        head_dim = self.embed_dim // self.heads
        x = ops.reshape(x, (batch, length, self.heads, head_dim))
        x = ops.transpose(x, (0, 2, 1, 3))
        return ops.reshape(x, (batch * self.heads, length, head_dim))

    def forward(
        self,
        query: Tensor,
        context: Tensor,
        stats: AttentionStats | None = None,
    ) -> Tensor:
        """
        Attend from ``query`` (B, Lq, E) to ``context`` (B, Lk, E).

        Returns:
            (B, Lq, E) attended values after the output projection.
        """
        if query.ndim != 3 or context.ndim != 3 or query.shape[0] != context.shape[0]:
            raise DimensionError(f'attention: shapes {query.shape} and {context.shape} do not pair')
        if query.shape[-1] != self.embed_dim or context.shape[-1] != self.embed_dim:
            raise DimensionError(
                f'attention: embed dims {query.shape[-1]} and {context.shape[-1]} '
                f'do not match {self.embed_dim}'
            )
        batch, query_len, _ = query.shape
        key_len = context.shape[1]
        head_dim = self.embed_dim // self.heads

        q = self._split(self.query(query))
        k = self._split(self.key(context))
        v = self._split(self.value(context))

        scores = ops.mul(ops.matmul(q, ops.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(head_dim))
        weights = ops.softmax(scores, axis=-1)
        if stats is not None:
            stats.record(query_len, key_len)

        attended = ops.matmul(weights, v)
        attended = ops.reshape(attended, (batch, self.heads, query_len, head_dim))
        attended = ops.transpose(attended, (0, 2, 1, 3))
        attended = ops.reshape(attended, (batch, query_len, self.embed_dim))
        return self.out(attended)


class CrossFieldAttention(Module):
    """
    Inter-field coupling: queries from one field, keys and values from another.

    The output keeps the query shape and adds the attended values to the
    query as a residual. With ``context is query`` this is plain residual
    self-attention.
    """

    def __init__(self, embed_dim: int, heads: int, rng: np.random.Generator) -> None:
        self.attention = MultiHeadAttention(embed_dim, heads, rng)

    def forward(
        self,
        query: Tensor,
        context: Tensor,
        stats: AttentionStats | None = None,
    ) -> Tensor:
        """
        Fuse ``context`` tokens into ``query`` tokens.

        Args:
            query: (N_q, E) or (B, N_q, E).
            context: (N_k, E) or (B, N_k, E).

        Raises:
            DimensionError: If the embed dims differ.
        """
        if query.shape[-1] != context.shape[-1]:
            raise DimensionError(
                f'cross-field attention: embed dims {query.shape[-1]} and {context.shape[-1]} differ'
            )
        single = query.ndim == 2
        if single:
            query = ops.reshape(query, (1,) + query.shape)
            context = ops.reshape(context, (1,) + context.shape)
        fused = ops.add(query, self.attention(query, context, stats))
        if single:
            fused = ops.reshape(fused, fused.shape[1:])
        return fused

    def self_attention(self, tokens: Tensor, stats: AttentionStats | None = None) -> Tensor:
        """Residual self-attention over ``tokens``."""
        return self.forward(tokens, tokens, stats)
