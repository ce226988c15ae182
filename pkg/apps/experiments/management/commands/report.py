"""
Render a run directory's CSV outputs as SVG charts.

Usage:
    python manage.py report --run-dir runs/scratch/ --out runs/scratch/report/
"""
from pathlib import Path
from typing import Any

from django.core.management.base import CommandParser

from apps.experiments.management.base import ExperimentCommand
from apps.experiments.services import ExperimentService


class Command(ExperimentCommand):
    help = 'Turn metrics.csv, pred_vs_true.csv and friends into SVGs.'

    def add_arguments(self, parser: CommandParser) -> None:
        super().add_arguments(parser)
        parser.add_argument('--run-dir', type=Path, required=True, help='Run directory written by train')

    def run(self, **options: Any) -> None:
        self.run_config(options).write(options['out'])
        written = ExperimentService.report(options['run_dir'], options['out'])
        self.done(f"{len(written)} charts written to {options['out']}")
