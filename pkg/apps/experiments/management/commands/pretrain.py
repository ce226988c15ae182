"""
Pretrain the backbone on reconstruction only.

Usage:
    python manage.py generate --n 2000 --seed 11 --regime pretrain --out data/pretrain/
    python manage.py pretrain --data data/pretrain/ --out runs/pretrain/
"""
from pathlib import Path
from typing import Any

from django.core.management.base import CommandParser

from apps.datasets.services import DatasetService
from apps.experiments.management.base import ExperimentCommand
from apps.training.services import TrainingService


class Command(ExperimentCommand):
    help = 'Train the backbone on the reconstruction objective and save backbone.ckpt.'

    def add_arguments(self, parser: CommandParser) -> None:
        super().add_arguments(parser)
        parser.add_argument('--data', type=Path, required=True, help='Pretraining dataset directory')
        self.add_train_arguments(parser)

    def run(self, **options: Any) -> None:
        run_config = self.run_config(options, train=self.train_overrides(options))
        dataset = DatasetService.load_dataset(options['data'])
        run_config = run_config.replace(
            backbone=TrainingService.fit_backbone_config(run_config.backbone, dataset)
        )
        run_config.write(options['out'])

        checkpoint = TrainingService.pretrain_backbone(
            dataset,
            run_config.train,
            run_config.backbone,
            run_config.tsh,
            run_config.split,
            options['out'],
            run_config.to_dict(),
        )
        self.done(f"Backbone checkpoint (epoch {checkpoint.epoch}) written to {options['out'] / 'backbone.ckpt'}")
