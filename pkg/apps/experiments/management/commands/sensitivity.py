"""
Ridge sensitivity report over image PCs and scalar diagnostics.

Usage:
    python manage.py sensitivity --data data/ --k 32 --lambda 1.0 --out reports/sensitivity/
"""
from pathlib import Path
from typing import Any

from django.core.management.base import CommandParser

from apps.datasets.services import DatasetService
from apps.experiments.management.base import ExperimentCommand
from apps.sensitivity.services import SensitivityService


class Command(ExperimentCommand):
    help = 'Flag weakly identifiable parameters with a PCA + ridge surrogate.'

    def add_arguments(self, parser: CommandParser) -> None:
        super().add_arguments(parser)
        parser.add_argument('--data', type=Path, required=True, help='Dataset directory')
        parser.add_argument('--k', type=int, default=None, help='Number of principal components')
        parser.add_argument('--lambda', dest='alpha', type=float, default=None, help='Ridge strength')
        parser.add_argument('--r2-threshold', type=float, default=None)
        parser.add_argument('--split-seed', type=int, default=None)

    def run(self, **options: Any) -> None:
        run_config = self.run_config(
            options,
            sensitivity={
                'n_components': options['k'],
                'alpha': options['alpha'],
                'r2_threshold': options['r2_threshold'],
                'split_seed': options['split_seed'],
            },
        )
        run_config.write(options['out'])
        settings = run_config.sensitivity

        dataset = DatasetService.load_dataset(options['data'])
        report = SensitivityService.build_report(
            dataset,
            n_components=settings.n_components,
            alpha=settings.alpha,
            r2_threshold=settings.r2_threshold,
            split_seed=settings.split_seed,
        )
        SensitivityService.write_report(report, options['out'])
        self.done(f'Weakly identifiable parameters: {report.weak_parameters}')
