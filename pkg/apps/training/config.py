"""
Configuration of a joint training run.
"""
from dataclasses import asdict, dataclass, fields
from typing import Any

from apps.core.exceptions import ConfigError

MIN_LR = 1e-7
WARMUP_EPOCHS = 5
INIT_MODES = ('scratch', 'checkpoint')


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimization hyperparameters.

    A learning rate of exactly 0 freezes its parameter group; any other
    value must exceed ``min_lr``.

    Attributes:
        epochs: Total epochs.
        batch_size: Samples per optimizer step.
        lr_backbone: Peak learning rate of the backbone optimizer.
        lr_tsh: Peak learning rate of the head optimizer.
        weight_decay: Decoupled weight decay of both optimizers.
        seed: Seeds weight init, per-epoch shuffling and dropout.
        init: ``scratch`` or ``checkpoint``.
        checkpoint: Backbone checkpoint directory when ``init`` is ``checkpoint``.
        warmup_epochs: Linear warmup length.
        min_lr: Floor of both schedules.
    """

    epochs: int = 100
    batch_size: int = 8
    lr_backbone: float = 1e-4
    lr_tsh: float = 1e-5
    weight_decay: float = 0.01
    seed: int = 0
    init: str = 'scratch'
    checkpoint: str | None = None
    warmup_epochs: int = WARMUP_EPOCHS
    min_lr: float = MIN_LR

    def validate(self) -> 'TrainConfig':
        """
        Raises:
            ConfigError: If an invariant does not hold.
        """
        if self.epochs < 1:
            raise ConfigError(f'epochs must be at least 1, got {self.epochs}')
        if self.batch_size < 1:
            raise ConfigError(f'batch_size must be at least 1, got {self.batch_size}')
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ConfigError(
                f'warmup_epochs must be in [0, epochs), got {self.warmup_epochs} for {self.epochs} epochs'
            )
        if self.min_lr < 0:
            raise ConfigError(f'min_lr must be non-negative, got {self.min_lr}')
        for name in ('lr_backbone', 'lr_tsh'):
            lr = getattr(self, name)
            if lr != 0 and lr <= self.min_lr:
                raise ConfigError(f'{name} must be 0 (frozen) or above min_lr {self.min_lr}, got {lr}')
        if self.weight_decay < 0:
            raise ConfigError(f'weight_decay must be non-negative, got {self.weight_decay}')
        if self.init not in INIT_MODES:
            raise ConfigError(f'init must be one of {list(INIT_MODES)}, got {self.init!r}')
        if self.init == 'checkpoint' and not self.checkpoint:
            raise ConfigError('init=checkpoint needs a checkpoint path')
        return self

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> 'TrainConfig':
        """Build from a dict, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f'unknown train keys: {unknown}')
        return cls(**data).validate()
