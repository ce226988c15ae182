"""
Data-scaling study over nested training fractions.

Usage:
    python manage.py scale --data data/ --fractions 0.05,0.10,0.25,0.50,0.75,1.0 --seeds 3 --out runs/scale/
"""
from pathlib import Path
from typing import Any

from django.core.management.base import CommandParser

from apps.core.management.base import parse_fractions
from apps.experiments.management.base import ExperimentCommand
from apps.experiments.services import ExperimentService

DEFAULT_FRACTIONS = '0.05,0.10,0.25,0.50,0.75,1.0'


class Command(ExperimentCommand):
    help = 'Train every fraction x seed and plot loss curves.'

    def add_arguments(self, parser: CommandParser) -> None:
        super().add_arguments(parser)
        parser.add_argument('--data', type=Path, required=True, help='Dataset directory')
        parser.add_argument('--fractions', default=DEFAULT_FRACTIONS)
        parser.add_argument('--seeds', type=int, default=3)
        parser.add_argument('--parallel', action='store_true', help='Send arms to the Celery broker')
        self.add_train_arguments(parser)

    def run(self, **options: Any) -> None:
        self.require_positive(seeds=options['seeds'])
        fractions = parse_fractions(options['fractions'])
        run_config = self.run_config(options, train=self.train_overrides(options))
        run_config.write(options['out'])

        frame = ExperimentService.scale_study(
            options['data'], run_config, fractions, options['seeds'], options['out'], parallel=options['parallel']
        )
        self.done(f"Scale study: {len(frame)} runs written to {options['out']}")
