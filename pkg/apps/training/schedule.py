"""
Per-epoch learning-rate schedule: linear warmup, then cosine decay.
"""
import math
from dataclasses import dataclass

from apps.core.exceptions import ConfigError, ParameterError
from apps.training.config import MIN_LR, WARMUP_EPOCHS


@dataclass(frozen=True)
class LRSchedule:
    """
    Warmup rises linearly from ``min_lr`` at epoch 0 to ``base_lr`` at
    ``warmup_epochs``; the cosine phase reaches ``min_lr`` at the final
    epoch, which takes precedence over the end of warmup. A single-epoch
    run stays at ``base_lr``. ``base_lr == 0`` is a frozen group.
    """

    base_lr: float
    total_epochs: int
    warmup_epochs: int = WARMUP_EPOCHS
    min_lr: float = MIN_LR

    def validate(self) -> 'LRSchedule':
        if self.base_lr != 0 and self.min_lr > self.base_lr:
            raise ConfigError(f'min_lr {self.min_lr} exceeds base_lr {self.base_lr}')
        if not 0 <= self.warmup_epochs < self.total_epochs:
            raise ConfigError(
                f'warmup_epochs {self.warmup_epochs} must be below total_epochs {self.total_epochs}'
            )
        return self


def lr_at(schedule: LRSchedule, epoch: int) -> float:
    """
    Learning rate for ``epoch``.

    Raises:
        ParameterError: If ``epoch`` is outside ``[0, total_epochs)``.
    """
    if not 0 <= epoch < schedule.total_epochs:
        raise ParameterError(f'epoch {epoch} outside [0, {schedule.total_epochs})')
    base, low, warmup = schedule.base_lr, schedule.min_lr, schedule.warmup_epochs
    if base == 0:
        return 0.0
    final = schedule.total_epochs - 1
    # The floor wins on the last epoch, also when warmup ends there.
    if epoch == final and final > 0:
        return low
    if epoch < warmup:
        return low + (base - low) * epoch / warmup
    if epoch == warmup:
        return base
    span = final - warmup
    return low + 0.5 * (base - low) * (1.0 + math.cos(math.pi * (epoch - warmup) / span))
