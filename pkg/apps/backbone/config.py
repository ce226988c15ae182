"""
Configuration of the factorized-attention backbone.
"""
from dataclasses import asdict, dataclass, fields
from typing import Any

from apps.core.exceptions import ConfigError


@dataclass(frozen=True)
class BackboneConfig:
    """
    Backbone hyperparameters.

    The field extents are part of the config because the learned
    positional embeddings are sized by the token grid.

    Attributes:
        field_extents: (T, D, H, W) of the input field.
        components: Components per field (4 energy bands for the images).
        patch_size: (patch_h, patch_w).
        embed_dim: Token width E.
        depth: Number of axial blocks.
        heads: Attention heads per axis.
        mlp_ratio: Hidden width of the block MLP as a multiple of E.
        dropout_rate: Dropout inside the block MLPs.
    """

    field_extents: tuple[int, int, int, int] = (1, 1, 16, 16)
    components: int = 4
    patch_size: tuple[int, int] = (4, 4)
    embed_dim: int = 32
    depth: int = 2
    heads: int = 2
    mlp_ratio: int = 2
    dropout_rate: float = 0.0

    def validate(self) -> 'BackboneConfig':
        """
        Check the config invariants.

        Raises:
            ConfigError: If an extent or width is not admissible.
        """
        if len(self.field_extents) != 4 or any(e < 1 for e in self.field_extents):
            raise ConfigError(f'field extents must be four positive values, got {self.field_extents}')
        if len(self.patch_size) != 2 or any(p < 1 for p in self.patch_size):
            raise ConfigError(f'patch size must be two positive values, got {self.patch_size}')
        height, width = self.field_extents[2:]
        if height % self.patch_size[0] or width % self.patch_size[1]:
            raise ConfigError(
                f'field {height}x{width} is not divisible by patch {self.patch_size}'
            )
        for name in ('components', 'embed_dim', 'depth', 'heads', 'mlp_ratio'):
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be at least 1')
        if self.embed_dim % self.heads:
            raise ConfigError(f'embed_dim {self.embed_dim} is not divisible by heads {self.heads}')
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f'dropout_rate must be in [0, 1), got {self.dropout_rate}')
        return self

    @property
    def token_grid(self) -> tuple[int, int, int, int]:
        """Return (T, D, H', W')."""
        t, d, h, w = self.field_extents
        return t, d, h // self.patch_size[0], w // self.patch_size[1]

    @property
    def num_tokens(self) -> int:
        """Return N = T * D * H' * W'."""
        t, d, h, w = self.token_grid
        return t * d * h * w

    @property
    def active_axes(self) -> tuple[int, ...]:
        """Return token-grid axes (0..3) with extent above one, in T, D, H, W order."""
        return tuple(axis for axis, extent in enumerate(self.token_grid) if extent > 1)

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-friendly dict."""
        data = asdict(self)
        data['field_extents'] = list(self.field_extents)
        data['patch_size'] = list(self.patch_size)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'BackboneConfig':
        """Build from a dict, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f'unknown backbone keys: {unknown}')
        values = dict(data)
        for key in ('field_extents', 'patch_size'):
            if key in values:
                values[key] = tuple(int(v) for v in values[key])
        return cls(**values).validate()

    @classmethod
    def for_image(cls, size: int, **overrides: Any) -> 'BackboneConfig':
        """Return the default config for a static ``size`` x ``size`` image."""
        return cls(field_extents=(1, 1, size, size), **overrides).validate()
