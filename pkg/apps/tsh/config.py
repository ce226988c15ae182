"""
Configuration of the task-specific regression head.
"""
from dataclasses import asdict, dataclass, fields
from typing import Any

from apps.core.exceptions import ConfigError

N_SCALARS = 15
N_PARAMETERS = 5
IDENTIFIABLE_PARAMETERS = (1, 2, 4)


@dataclass(frozen=True)
class TSHConfig:
    """
    Head hyperparameters.

    ``n_params_out`` is 3 (parameters 1, 2 and 4, the ones the sensitivity
    screen keeps) or 5 (all parameters).
    """

    conv_channels: int = 32
    conv_kernel: int = 3
    dense_dims: tuple[int, int] = (64, 32)
    scalar_mlp_dims: tuple[int, int] = (32, 16)
    dropout_rate: float = 0.1
    n_params_out: int = 3

    def validate(self) -> 'TSHConfig':
        """
        Check the config invariants.

        Raises:
            ConfigError: On a non-positive width or an unsupported output count.
        """
        if self.n_params_out not in (3, 5):
            raise ConfigError(f'n_params_out must be 3 or 5, got {self.n_params_out}')
        if len(self.dense_dims) != 2 or len(self.scalar_mlp_dims) != 2:
            raise ConfigError('dense_dims and scalar_mlp_dims need exactly two widths each')
        widths = (self.conv_channels, self.conv_kernel, *self.dense_dims, *self.scalar_mlp_dims)
        if any(width < 1 for width in widths):
            raise ConfigError(f'all widths must be at least 1, got {widths}')
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f'dropout_rate must be in [0, 1), got {self.dropout_rate}')
        return self

    @property
    def target_indices(self) -> tuple[int, ...]:
        """Return the simulator parameter indices the head predicts."""
        return IDENTIFIABLE_PARAMETERS if self.n_params_out == 3 else tuple(range(N_PARAMETERS))

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data['dense_dims'] = list(self.dense_dims)
        data['scalar_mlp_dims'] = list(self.scalar_mlp_dims)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'TSHConfig':
        """Build from a dict, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f'unknown tsh keys: {unknown}')
        values = dict(data)
        for key in ('dense_dims', 'scalar_mlp_dims'):
            if key in values:
                values[key] = tuple(int(v) for v in values[key])
        return cls(**values).validate()
