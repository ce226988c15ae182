"""
Jointly train backbone and head, then evaluate on the test split.

Usage:
    python manage.py train --data data/ --config run.json --out runs/scratch/
    python manage.py train --data data/ --init checkpoint --checkpoint runs/pretrain/backbone.ckpt --out runs/ft/
"""
from pathlib import Path
from typing import Any

from django.core.management.base import CommandParser

from apps.datasets.services import DatasetService
from apps.experiments.management.base import ExperimentCommand
from apps.training.config import INIT_MODES
from apps.training.services import TrainingService


class Command(ExperimentCommand):
    help = 'Train a model and write checkpoints, metrics and test predictions.'

    def add_arguments(self, parser: CommandParser) -> None:
        super().add_arguments(parser)
        parser.add_argument('--data', type=Path, required=True, help='Dataset directory')
        parser.add_argument('--init', choices=INIT_MODES, default=None)
        parser.add_argument('--checkpoint', type=str, default=None, help='Backbone checkpoint for --init checkpoint')
        parser.add_argument('--fraction', type=float, default=None, help='Fraction of the training split to use')
        self.add_train_arguments(parser)

    def run(self, **options: Any) -> None:
        train = self.train_overrides(options)
        train.update(init=options['init'], checkpoint=options['checkpoint'])
        run_config = self.run_config(options, train=train, split={'train_fraction': options['fraction']})

        dataset = DatasetService.load_dataset(options['data'])
        run_config = run_config.replace(
            backbone=TrainingService.fit_backbone_config(run_config.backbone, dataset)
        )
        run_config.write(options['out'])

        outcome = TrainingService.train_run(
            dataset,
            run_config.train,
            run_config.backbone,
            run_config.tsh,
            run_config.split,
            options['out'],
            run_config.to_dict(),
        )
        self.done(
            f"Run written to {outcome.out_dir}: test recon_mse {outcome.test_metrics['recon_mse']:.4e}, "
            f"reg_mse {outcome.test_metrics['reg_mse']:.4e}"
        )
