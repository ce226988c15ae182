"""
Task-specific head: regresses simulator parameters from backbone latents
fused with the scalar diagnostics.
"""
import numpy as np

from apps.core.exceptions import DimensionError
from apps.tensor_core import ops
from apps.tensor_core.nn import Linear, Module, Parameter, trunc_normal
from apps.tensor_core.tensor import Tensor
from apps.tsh.config import N_SCALARS, TSHConfig


class ConvBlock(Module):
    """Conv1D -> GELU -> Dropout over (B, C, N) signals, length preserving."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int, rng: np.random.Generator) -> None:
        self.kernel = Parameter(trunc_normal(rng, (out_channels, in_channels, kernel)))
        self.bias = Parameter(np.zeros(out_channels))
        self.padding = kernel // 2

    def forward(self, x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
        out = ops.conv(x, self.kernel, dims=1, stride=1, padding=self.padding)
        bias = ops.reshape(self.bias, (self.bias.shape[0], 1))
        out = ops.add(out, ops.expand(bias, out.shape))
        return ops.dropout(ops.gelu(out), rate, self.training, rng)


class TaskSpecificHead(Module):
    """
    Image path (two conv blocks, mean pool, two dense blocks), scalar path
    (two dense + GELU layers) and a single fused projection.
    """

    def __init__(self, cfg: TSHConfig, embed_dim: int, rng: np.random.Generator) -> None:
        self.cfg = cfg.validate()
        self.embed_dim = embed_dim
        d0, d1 = cfg.dense_dims
        s0, s1 = cfg.scalar_mlp_dims
        self.conv1 = ConvBlock(embed_dim, cfg.conv_channels, cfg.conv_kernel, rng)
        self.conv2 = ConvBlock(cfg.conv_channels, cfg.conv_channels, cfg.conv_kernel, rng)
        self.dense1 = Linear(cfg.conv_channels, d0, rng)
        self.dense2 = Linear(d0, d1, rng)
        self.scalar1 = Linear(N_SCALARS, s0, rng)
        self.scalar2 = Linear(s0, s1, rng)
        self.project = Linear(d1 + s1, cfg.n_params_out, rng)

    def image_path(self, latents: Tensor, rng: np.random.Generator | None = None) -> Tensor:
        """
        Treat the N tokens as a 1D signal with E channels.

        Args:
            latents: (N, E) or (B, N, E).

        Returns:
            (dense_dims[1],) or (B, dense_dims[1]) features.

        Raises:
            DimensionError: If N is smaller than the conv kernel.
        """
        single = latents.ndim == 2
        if single:
            latents = ops.reshape(latents, (1,) + latents.shape)
        if latents.ndim != 3 or latents.shape[-1] != self.embed_dim:
            raise DimensionError(f'latents {latents.shape} do not have embed dim {self.embed_dim}')
        if latents.shape[1] < self.cfg.conv_kernel:
            raise DimensionError(
                f'{latents.shape[1]} tokens are fewer than the conv kernel {self.cfg.conv_kernel}'
            )
        rate = self.cfg.dropout_rate
        signal = ops.transpose(latents, (0, 2, 1))
        signal = self.conv1(signal, rate, rng)
        signal = self.conv2(signal, rate, rng)
        pooled = ops.reduce_mean(signal, axis=-1)
        features = ops.dropout(ops.gelu(self.dense1(pooled)), rate, self.training, rng)
        features = ops.dropout(ops.gelu(self.dense2(features)), rate, self.training, rng)
        return ops.reshape(features, features.shape[1:]) if single else features

    def scalar_path(self, scalars: Tensor) -> Tensor:
        """
        Encode the 15 scalar diagnostics.

        Raises:
            DimensionError: If the trailing extent is not 15.
        """
        if scalars.shape[-1] != N_SCALARS or scalars.ndim not in (1, 2):
            raise DimensionError(f'expected {N_SCALARS} scalars, got shape {scalars.shape}')
        hidden = ops.gelu(self.scalar1(scalars))
        return ops.gelu(self.scalar2(hidden))

    def fuse_project(self, image_features: Tensor, scalar_features: Tensor) -> Tensor:
        """
        Concatenate both feature vectors and project to the parameters.

        Raises:
            DimensionError: If a width differs from the config.
        """
        d1 = self.cfg.dense_dims[1]
        s1 = self.cfg.scalar_mlp_dims[1]
        if image_features.shape[-1] != d1 or scalar_features.shape[-1] != s1:
            raise DimensionError(
                f'feature widths {image_features.shape[-1]}/{scalar_features.shape[-1]} '
                f'do not match {d1}/{s1}'
            )
        if image_features.shape[:-1] != scalar_features.shape[:-1]:
            raise DimensionError('image and scalar features have different batch extents')
        fused = ops.concat([image_features, scalar_features], axis=-1)
        return self.project(fused)

    def forward(
        self,
        latents: Tensor,
        scalars: Tensor,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Return standardized parameter estimates."""
        return self.fuse_project(self.image_path(latents, rng), self.scalar_path(scalars))
