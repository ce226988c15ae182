"""
Factorized-attention encoder-decoder over (T, D, H, W, C) fields.

Pipeline: component-wise strided convolution patch embedding, summed
per-axis positional embeddings, ``depth`` axial blocks, final layer norm,
and a linear de-patchify head for reconstruction.
"""
import logging

import numpy as np

from apps.backbone.attention import AttentionStats, MultiHeadAttention
from apps.backbone.config import BackboneConfig
from apps.backbone.fields import FieldTensor
from apps.core.exceptions import ConfigError, DimensionError
from apps.tensor_core import ops
from apps.tensor_core.nn import LayerNorm, Linear, Module, Parameter, trunc_normal
from apps.tensor_core.tensor import Tensor

logger = logging.getLogger('icf_inverse')


class AxialBlock(Module):
    """
    Pre-norm residual block with one self-attention per active axis.

    Axes of extent 1 get no attention layer at all. Token tensors are
    ``(B, T, D, H', W', E)``.
    """

    def __init__(self, cfg: BackboneConfig, rng: np.random.Generator) -> None:
        self.axes = list(cfg.active_axes)
        self.norms = [LayerNorm(cfg.embed_dim) for _ in self.axes]
        self.attentions = [MultiHeadAttention(cfg.embed_dim, cfg.heads, rng) for _ in self.axes]
        hidden = cfg.mlp_ratio * cfg.embed_dim
        self.mlp_norm = LayerNorm(cfg.embed_dim)
        self.fc1 = Linear(cfg.embed_dim, hidden, rng)
        self.fc2 = Linear(hidden, cfg.embed_dim, rng)
        self.dropout_rate = cfg.dropout_rate

    def forward(
        self,
        tokens: Tensor,
        stats: AttentionStats | None = None,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        x = tokens
        for axis, norm, attention in zip(self.axes, self.norms, self.attentions):
            # grid axis i lives at position i + 1 after the batch axis
            position = axis + 1
            order = [i for i in range(5) if i != position] + [position, 5]
            inverse = list(np.argsort(order))
            moved = ops.transpose(norm(x), order)
            folded = moved.shape
            sequence = ops.reshape(moved, (-1, folded[-2], folded[-1]))
            attended = attention(sequence, sequence, stats)
            attended = ops.transpose(ops.reshape(attended, folded), inverse)
            x = ops.add(x, attended)

        h = ops.gelu(self.fc1(self.mlp_norm(x)))
        h = ops.dropout(h, self.dropout_rate, self.training, rng)
        h = ops.dropout(self.fc2(h), self.dropout_rate, self.training, rng)
        return ops.add(x, h)


class Backbone(Module):
    """
    Encoder-decoder used for reconstruction and as the latent feature source.

    Attributes:
        cfg: The validated config.
        stats: Attention score counter of the latest encode or axial_block call.
    """

    def __init__(self, cfg: BackboneConfig, rng: np.random.Generator) -> None:
        self.cfg = cfg.validate()
        ph, pw = cfg.patch_size
        e = cfg.embed_dim
        self.patch_kernel = Parameter(trunc_normal(rng, (e, 1, ph, pw)))
        self.patch_bias = Parameter(np.zeros(e))
        self.fuse = Linear(cfg.components * e, e, rng)
        t, d, hp, wp = cfg.token_grid
        self.pos_t = Parameter(trunc_normal(rng, (t, e)), name='pos_T')
        self.pos_d = Parameter(trunc_normal(rng, (d, e)), name='pos_D')
        self.pos_h = Parameter(trunc_normal(rng, (hp, e)), name='pos_H')
        self.pos_w = Parameter(trunc_normal(rng, (wp, e)), name='pos_W')
        self.blocks = [AxialBlock(cfg, rng) for _ in range(cfg.depth)]
        self.final_norm = LayerNorm(e)
        self.head = Linear(e, ph * pw * cfg.components, rng, zero_init=True)
        self.stats = AttentionStats()
        logger.debug(f'Backbone built with {self.num_parameters()} parameters')

    def _as_batch(self, x: FieldTensor) -> Tensor:
        data = x.data if x.batched else ops.reshape(x.data, (1,) + x.data.shape)
        if x.extents != self.cfg.field_extents or x.components != self.cfg.components:
            raise DimensionError(
                f'field {x.extents}x{x.components} does not match config '
                f'{self.cfg.field_extents}x{self.cfg.components}'
            )
        return data

    def patch_embed(self, x: FieldTensor) -> Tensor:
        """
        Component-wise strided convolution followed by a learned component fusion.

        Every component is convolved with the same kernel (stride = patch
        size); the C per-component feature maps are then mixed into E
        channels by a linear map.

        Returns:
            Token grid (T, D, H', W', E), or (B, T, D, H', W', E) for a batch.

        Raises:
            ConfigError: If H or W is not divisible by the patch size.
        """
        height, width = x.extents[2:]
        ph, pw = self.cfg.patch_size
        if height % ph or width % pw:
            raise ConfigError(f'field {height}x{width} is not divisible by patch {self.cfg.patch_size}')
        data = self._as_batch(x)
        b, t, d, h, w, c = data.shape
        e = self.cfg.embed_dim
        hp, wp = h // ph, w // pw

        per_component = ops.reshape(ops.transpose(data, (0, 1, 2, 5, 3, 4)), (b * t * d * c, 1, h, w))
        maps = ops.conv(per_component, self.patch_kernel, dims=2, stride=(ph, pw))
        maps = ops.add(maps, ops.expand(ops.reshape(self.patch_bias, (e, 1, 1)), maps.shape))
        maps = ops.reshape(maps, (b, t, d, c, e, hp, wp))
        maps = ops.transpose(maps, (0, 1, 2, 5, 6, 3, 4))
        tokens = self.fuse(ops.reshape(maps, (b, t, d, hp, wp, c * e)))
        return tokens if x.batched else ops.reshape(tokens, tokens.shape[1:])

    def positional_embedding(self) -> Tensor:
        """Return the summed per-axis embeddings as (T, D, H', W', E)."""
        grid = self.cfg.token_grid + (self.cfg.embed_dim,)
        total = None
        for axis, table in enumerate((self.pos_t, self.pos_d, self.pos_h, self.pos_w)):
            view = [1, 1, 1, 1, self.cfg.embed_dim]
            view[axis] = grid[axis]
            term = ops.expand(ops.reshape(table, view), grid)
            total = term if total is None else ops.add(total, term)
        return total

    def axial_block(
        self,
        tokens: Tensor,
        index: int = 0,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """
        Apply block ``index`` to a token grid of the config's shape.

        Accepts (T, D, H', W', E) or (B, T, D, H', W', E); the output has the
        input's shape.
        """
        expected = self.cfg.token_grid + (self.cfg.embed_dim,)
        single = tokens.shape == expected
        if not single and tokens.shape[1:] != expected:
            raise DimensionError(f'token grid {tokens.shape} does not match {expected}')
        batch = ops.reshape(tokens, (1,) + expected) if single else tokens
        self.stats.reset()
        out = self.blocks[index](batch, self.stats, rng)
        return ops.reshape(out, expected) if single else out

    def encode(self, x: FieldTensor, rng: np.random.Generator | None = None) -> Tensor:
        """
        Encode a field into latent tokens.

        Returns:
            (N, E) for a single field, (B, N, E) for a batch, with
            N = T * D * H' * W'.
        """
        self.stats.reset()
        tokens = self.patch_embed(x)
        if not x.batched:
            tokens = ops.reshape(tokens, (1,) + tokens.shape)
        tokens = ops.add(tokens, ops.expand(self.positional_embedding(), tokens.shape))
        for block in self.blocks:
            tokens = block(tokens, self.stats, rng)
        tokens = self.final_norm(tokens)
        latents = ops.reshape(tokens, (tokens.shape[0], self.cfg.num_tokens, self.cfg.embed_dim))
        return latents if x.batched else ops.reshape(latents, latents.shape[1:])

    def reconstruct(self, latents: Tensor) -> FieldTensor:
        """
        Project every token back to its patch and reassemble the field.

        Raises:
            DimensionError: If the token count does not match the grid.
        """
        n, e = self.cfg.num_tokens, self.cfg.embed_dim
        single = latents.ndim == 2
        if latents.shape[-2:] != (n, e) or latents.ndim not in (2, 3):
            raise DimensionError(f'latents {latents.shape} do not match ({n}, {e}) tokens')
        if single:
            latents = ops.reshape(latents, (1, n, e))
        b = latents.shape[0]
        t, d, hp, wp = self.cfg.token_grid
        ph, pw = self.cfg.patch_size
        c = self.cfg.components

        patches = ops.reshape(self.head(latents), (b, t, d, hp, wp, ph, pw, c))
        patches = ops.transpose(patches, (0, 1, 2, 3, 5, 4, 6, 7))
        field = ops.reshape(patches, (b, t, d, hp * ph, wp * pw, c))
        if single:
            field = ops.reshape(field, field.shape[1:])
        return FieldTensor(field, c)

    def forward(self, x: FieldTensor, rng: np.random.Generator | None = None) -> tuple[Tensor, FieldTensor]:
        """Return ``(latents, reconstruction)``."""
        latents = self.encode(x, rng)
        return latents, self.reconstruct(latents)
