"""
Training services for the ICF inverse-estimation toolkit.

This module wires splits, model construction, the joint trainer,
evaluation and the run-directory outputs together.
"""
import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from apps.backbone.config import BackboneConfig
from apps.core.exceptions import DataIOError, ParameterError
from apps.datasets.container import Dataset
from apps.datasets.splits import SplitSpec, split
from apps.training.bundle import ModelBundle
from apps.training.checkpoint import (
    Checkpoint,
    backbone_checkpoint,
    bundle_checkpoint,
    load_backbone_into,
    load_checkpoint,
    save_checkpoint,
)
from apps.training.config import TrainConfig
from apps.training.evaluation import evaluate
from apps.training.metrics import FLOAT_FORMAT
from apps.training.trainer import train_joint
from apps.tsh.config import TSHConfig

logger = logging.getLogger('icf_inverse')

GALLERY_SAMPLES = 4


@dataclass
class RunOutcome:
    """What a finished training run reports back."""

    out_dir: str
    test_metrics: dict[str, float]
    final_row: dict[str, float]
    best_epoch: int
    train_samples: int

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _write_json(path: Path, data: dict[str, Any]) -> None:
    try:
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + '\n')
    except OSError as exc:
        raise DataIOError(f'cannot write {path}: {exc}') from exc


class TrainingService:
    """
    Service class for training operations.

    Provides methods for building models, running training and pretraining.
    """

    @staticmethod
    def fit_backbone_config(cfg: BackboneConfig, dataset: Dataset) -> BackboneConfig:
        """Size the backbone's field extents and components to the dataset images."""
        _, height, width, components = dataset.images.shape
        return dataclasses.replace(cfg, field_extents=(1, 1, height, width), components=components).validate()

    @staticmethod
    def build_bundle(backbone_cfg: BackboneConfig, tsh_cfg: TSHConfig, train_cfg: TrainConfig) -> ModelBundle:
        """
        Build a scratch bundle, or a finetune bundle whose backbone comes
        from ``train_cfg.checkpoint``.
        """
        bundle = ModelBundle(backbone_cfg, tsh_cfg, seed=train_cfg.seed)
        if train_cfg.init == 'checkpoint':
            checkpoint = load_checkpoint(Path(train_cfg.checkpoint))
            load_backbone_into(bundle, checkpoint)
            logger.info(f'Backbone initialized from {train_cfg.checkpoint}')
        return bundle

    @staticmethod
    def write_predictions(out_dir: Path, test: Dataset, parameters: np.ndarray, target_indices: tuple[int, ...]) -> None:
        """Write ``pred_vs_true.csv``: one row per test sample."""
        columns: dict[str, Any] = {'sample': np.arange(len(test))}
        for column, index in enumerate(target_indices):
            columns[f'true_param{index}'] = test.params[:, index]
            columns[f'pred_param{index}'] = parameters[:, column]
        pd.DataFrame(columns).to_csv(out_dir / 'pred_vs_true.csv', index=False, float_format=FLOAT_FORMAT)

    @staticmethod
    def write_reconstructions(out_dir: Path, truth: np.ndarray, reconstruction: np.ndarray) -> None:
        """Write ``reconstructions.csv`` in long format for the first test samples."""
        count = min(GALLERY_SAMPLES, truth.shape[0])
        records = []
        for kind, images in (('truth', truth), ('reconstruction', reconstruction)):
            for sample in range(count):
                for (row, col, band), value in np.ndenumerate(images[sample]):
                    records.append((sample, kind, row, col, band, value))
        frame = pd.DataFrame(records, columns=['sample', 'kind', 'row', 'col', 'band', 'value'])
        frame.to_csv(out_dir / 'reconstructions.csv', index=False, float_format=FLOAT_FORMAT)

    @staticmethod
    def train_run(
        dataset: Dataset,
        train_cfg: TrainConfig,
        backbone_cfg: BackboneConfig,
        tsh_cfg: TSHConfig,
        split_spec: SplitSpec,
        out_dir: Path,
        run_config: dict[str, Any] | None = None,
    ) -> RunOutcome:
        """
        Train, evaluate on the test split and write the run directory.

        Writes ``last.ckpt/``, ``best.ckpt/``, ``metrics.csv``,
        ``test_metrics.json``, ``pred_vs_true.csv`` and ``reconstructions.csv``.
        """
        out_dir = Path(out_dir)
        train, val, test = split(dataset, split_spec)
        if min(len(train), len(val), len(test)) == 0:
            raise ParameterError(f'empty split: train {len(train)}, val {len(val)}, test {len(test)}')
        backbone_cfg = TrainingService.fit_backbone_config(backbone_cfg, dataset)
        bundle = TrainingService.build_bundle(backbone_cfg, tsh_cfg, train_cfg)
        logger.info(
            f'Training {train_cfg.init} model on {len(train)} samples '
            f'({len(val)} val, {len(test)} test) for {train_cfg.epochs} epochs'
        )

        result = train_joint(bundle, train, val, train_cfg)
        metrics, predictions = evaluate(bundle, test)
        metrics['best_epoch'] = result.best_epoch

        out_dir.mkdir(parents=True, exist_ok=True)
        last = bundle_checkpoint(bundle, train_cfg.epochs - 1, result.optimizers, result.rng, run_config)
        save_checkpoint(last, out_dir / 'last.ckpt')
        best = Checkpoint(
            kind='bundle',
            config=last.config,
            arrays=result.best_state,
            epoch=result.best_epoch,
        )
        save_checkpoint(best, out_dir / 'best.ckpt')

        result.log.test = metrics
        result.log.write_csv(out_dir / 'metrics.csv')
        _write_json(out_dir / 'test_metrics.json', metrics)
        TrainingService.write_predictions(out_dir, test, predictions.parameters, bundle.target_indices)
        TrainingService.write_reconstructions(out_dir, test.images, predictions.reconstructions)

        summary = ', '.join(f'{k}={v:.4g}' for k, v in metrics.items() if k.startswith('r2_'))
        logger.info(f"Test: recon_mse={metrics['recon_mse']:.4e}, reg_mse={metrics['reg_mse']:.4e}, {summary}")
        return RunOutcome(
            out_dir=str(out_dir),
            test_metrics=metrics,
            final_row=result.log.last,
            best_epoch=result.best_epoch,
            train_samples=len(train),
        )

    @staticmethod
    def pretrain_backbone(
        dataset: Dataset,
        train_cfg: TrainConfig,
        backbone_cfg: BackboneConfig,
        tsh_cfg: TSHConfig,
        split_spec: SplitSpec,
        out_dir: Path,
        run_config: dict[str, Any] | None = None,
    ) -> Checkpoint:
        """
        Train the backbone on reconstruction only and save ``backbone.ckpt/``.

        The head is never updated and is not stored.
        """
        out_dir = Path(out_dir)
        train, val, _ = split(dataset, split_spec)
        backbone_cfg = TrainingService.fit_backbone_config(backbone_cfg, dataset)
        bundle = ModelBundle(backbone_cfg, tsh_cfg, seed=train_cfg.seed)
        logger.info(f'Pretraining backbone on {len(train)} samples for {train_cfg.epochs} epochs')
        result = train_joint(bundle, train, val, train_cfg, objective='reconstruction')

        out_dir.mkdir(parents=True, exist_ok=True)
        checkpoint = backbone_checkpoint(bundle, train_cfg.epochs - 1, run_config)
        save_checkpoint(checkpoint, out_dir / 'backbone.ckpt')
        result.log.write_csv(out_dir / 'metrics.csv')
        return checkpoint
