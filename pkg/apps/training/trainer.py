"""
Dual-objective trainer.

Every batch runs one forward pass and one backward pass on
``L_rec + L_reg``. The backbone and head own separate AdamW optimizers and
schedules; since ``L_rec`` does not depend on the head, each group sees
exactly the gradients of its own objective plus, for the backbone, the
regression gradient flowing through the latents.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings

from apps.core.exceptions import NumericalError, ParameterError, TrainingAborted
from apps.datasets.container import Dataset
from apps.tensor_core import ops
from apps.tensor_core.tensor import Tape, Tensor, backward
from apps.training.bundle import ModelBundle
from apps.training.config import TrainConfig
from apps.training.evaluation import predict
from apps.training.metrics import MetricsLog
from apps.training.optim import AdamW
from apps.training.schedule import LRSchedule, lr_at

logger = logging.getLogger('icf_inverse')

OBJECTIVES = ('joint', 'reconstruction')


@dataclass
class TrainResult:
    """Trained bundle, its log, optimizers and the best-validation snapshot."""

    bundle: ModelBundle
    log: MetricsLog
    optimizers: dict[str, AdamW]
    rng: np.random.Generator
    best_state: dict[str, np.ndarray] = field(default_factory=dict)
    best_epoch: int = -1


def build_optimizers(bundle: ModelBundle, cfg: TrainConfig) -> dict[str, AdamW]:
    """
    One AdamW per parameter group.

    Raises:
        ParameterError: If a parameter ended up in both groups.
    """
    groups = bundle.parameter_groups()
    optimizers = {
        'backbone': AdamW(groups['backbone'], cfg.lr_backbone, cfg.weight_decay),
        'tsh': AdamW(groups['tsh'], cfg.lr_tsh, cfg.weight_decay),
    }
    if optimizers['backbone'].ids() & optimizers['tsh'].ids():
        raise ParameterError('backbone and head optimizers share parameters')
    return optimizers


def _batch_losses(
    bundle: ModelBundle,
    train: Dataset,
    indices: np.ndarray,
    rng: np.random.Generator,
    objective: str,
) -> tuple[Tensor, Tensor | None]:
    field_, scalars, targets = bundle.inputs(train, indices)
    if objective == 'reconstruction':
        _, reconstruction = bundle.backbone(field_, rng)
        l_rec = ops.mse(reconstruction.data, field_.data)
        return l_rec, None
    reconstruction, estimates = bundle.forward(field_, scalars, rng)
    return ops.mse(reconstruction.data, field_.data), ops.mse(estimates, targets)


def train_joint(
    bundle: ModelBundle,
    train: Dataset,
    val: Dataset,
    cfg: TrainConfig,
    objective: str = 'joint',
    fit_normalization: bool = True,
) -> TrainResult:
    """
    Train ``bundle`` in place.

    Args:
        bundle: Model to train.
        train: Training split.
        val: Validation split, scored after every epoch.
        cfg: Hyperparameters.
        objective: ``joint`` (L_rec + L_reg) or ``reconstruction`` (backbone only).
        fit_normalization: Refit scalar/target statistics on ``train`` first.

    Returns:
        The training result, with the state of the epoch of lowest total
        validation loss.

    Raises:
        ParameterError: If a split is empty or the objective is unknown.
        TrainingAborted: If a loss, gradient or update becomes non-finite.
    """
    cfg = cfg.validate()
    if objective not in OBJECTIVES:
        raise ParameterError(f'objective must be one of {list(OBJECTIVES)}, got {objective!r}')
    if len(train) == 0 or len(val) == 0:
        raise ParameterError(f'train and val splits must be non-empty, got {len(train)}/{len(val)}')
    if fit_normalization:
        bundle.fit_normalization(train)

    log_every = settings.ICF_INVERSE.get('LOG_EVERY_EPOCHS', 1)
    rng = np.random.default_rng(cfg.seed)
    optimizers = build_optimizers(bundle, cfg)
    schedules = {
        'backbone': LRSchedule(cfg.lr_backbone, cfg.epochs, cfg.warmup_epochs, cfg.min_lr).validate(),
        'tsh': LRSchedule(cfg.lr_tsh, cfg.epochs, cfg.warmup_epochs, cfg.min_lr).validate(),
    }
    result = TrainResult(bundle=bundle, log=MetricsLog(), optimizers=optimizers, rng=rng)
    best_loss = np.inf

    for epoch in range(cfg.epochs):
        lrs = {group: lr_at(schedule, epoch) for group, schedule in schedules.items()}
        bundle.train()
        order = rng.permutation(len(train))
        rec_total = reg_total = 0.0
        for batch, start in enumerate(range(0, len(train), cfg.batch_size)):
            indices = order[start:start + cfg.batch_size]
            losses: dict[str, float] = {}
            try:
                with Tape() as tape:
                    l_rec, l_reg = _batch_losses(bundle, train, indices, rng, objective)
                    losses['reconstruction'] = l_rec.item()
                    total = l_rec
                    if l_reg is not None:
                        losses['regression'] = l_reg.item()
                        total = ops.add(l_rec, l_reg)
                backward(total, tape)
                optimizers['backbone'].step(lrs['backbone'])
                if objective == 'joint':
                    optimizers['tsh'].step(lrs['tsh'])
            except NumericalError as exc:
                logger.error(f'Training aborted at epoch {epoch}, batch {batch}: {exc.detail}')
                raise TrainingAborted(
                    f'non-finite values at epoch {epoch}, batch {batch}: {exc.detail}',
                    epoch=epoch,
                    batch=batch,
                    losses=losses,
                ) from exc
            finally:
                bundle.zero_grad()
            rec_total += losses['reconstruction'] * len(indices)
            reg_total += losses.get('regression', 0.0) * len(indices)

        scores = predict(bundle, val)
        val_reg = scores.reg_mse if objective == 'joint' else float('nan')
        train_reg = reg_total / len(train) if objective == 'joint' else float('nan')
        result.log.append(
            epoch=epoch,
            lr_backbone=lrs['backbone'],
            lr_tsh=lrs['tsh'] if objective == 'joint' else 0.0,
            backbone_train_mse=rec_total / len(train),
            backbone_val_mse=scores.recon_mse,
            tsh_train_mse=train_reg,
            tsh_val_mse=val_reg,
        )
        val_total = scores.recon_mse + (scores.reg_mse if objective == 'joint' else 0.0)
        if val_total < best_loss:
            best_loss = val_total
            result.best_state = bundle.state_dict()
            result.best_epoch = epoch
        if (epoch + 1) % log_every == 0 or epoch == cfg.epochs - 1:
            row = result.log.last
            logger.info(
                f"epoch {epoch + 1}/{cfg.epochs}: rec {row['backbone_train_mse']:.4e}/"
                f"{row['backbone_val_mse']:.4e} reg {row['tsh_train_mse']:.4e}/{row['tsh_val_mse']:.4e}"
            )
    return result
