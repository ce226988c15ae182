"""
Generate a synthetic dataset container.

Usage:
    python manage.py generate --n 2000 --size 16 --seed 7 --out data/
"""
from pathlib import Path
from typing import Any

from django.conf import settings
from django.core.management.base import CommandParser

from apps.datasets.services import REGIMES, DatasetService
from apps.experiments.management.base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Simulate samples and write them as a dataset container.'

    def add_arguments(self, parser: CommandParser) -> None:
        parser.add_argument('--n', type=int, required=True, help='Number of samples')
        parser.add_argument('--size', type=int, default=None, help='Image side length (power of two, 8 to 64)')
        parser.add_argument('--seed', type=int, default=None, help='Dataset seed')
        parser.add_argument('--regime', choices=sorted(REGIMES), default='finetune')
        parser.add_argument('--out', type=Path, required=True, help='Dataset directory')

    def run(self, **options: Any) -> None:
        self.require_positive(n=options['n'])
        config = settings.ICF_INVERSE
        size = options['size'] if options['size'] is not None else config.get('IMAGE_SIZE', 16)
        seed = options['seed'] if options['seed'] is not None else config.get('DEFAULT_SEED', 7)
        out = options['out']

        self.run_config({**options, 'size': size, 'seed': seed}).write(out)
        manifest = DatasetService.generate_dataset(options['n'], size, seed, out, regime=options['regime'])
        self.done(f'Wrote {manifest.sample_count} samples to {out}')
