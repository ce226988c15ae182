"""
Finetune-vs-scratch comparison over training fractions.

Usage:
    python manage.py compare --data data/ --pretrain-ckpt runs/pretrain/backbone.ckpt --seeds 3 --out runs/compare/
"""
from pathlib import Path
from typing import Any

from django.core.management.base import CommandError, CommandParser

from apps.core.management.base import parse_fractions
from apps.experiments.management.base import ExperimentCommand
from apps.experiments.management.commands.scale import DEFAULT_FRACTIONS
from apps.experiments.services import ExperimentService


class Command(ExperimentCommand):
    help = 'Train scratch and finetune arms with identical configs and compare test losses.'

    def add_arguments(self, parser: CommandParser) -> None:
        super().add_arguments(parser)
        parser.add_argument('--data', type=Path, required=True, help='Dataset directory')
        parser.add_argument('--pretrain-ckpt', type=Path, default=None, help='Backbone checkpoint from pretrain')
        parser.add_argument('--fractions', default=DEFAULT_FRACTIONS)
        parser.add_argument('--seeds', type=int, default=3)
        parser.add_argument('--parallel', action='store_true', help='Send arms to the Celery broker')
        self.add_train_arguments(parser)

    def run(self, **options: Any) -> None:
        if options['pretrain_ckpt'] is None:
            raise CommandError('--pretrain-ckpt is required', returncode=2)
        self.require_positive(seeds=options['seeds'])
        fractions = parse_fractions(options['fractions'])
        run_config = self.run_config(options, train=self.train_overrides(options))
        run_config.write(options['out'])

        frame = ExperimentService.compare_study(
            options['data'],
            run_config,
            options['pretrain_ckpt'],
            fractions,
            options['seeds'],
            options['out'],
            parallel=options['parallel'],
        )
        self.done(f"Comparison: {len(frame)} runs written to {options['out']}")
