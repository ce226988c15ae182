"""
Shared argument handling for commands that take a RunConfig.
"""
from pathlib import Path
from typing import Any

from django.core.management.base import CommandParser

from apps.core.management.base import InversionCommand
from apps.experiments.config import RunConfig


class ExperimentCommand(InversionCommand):
    """Command reading ``--config`` plus section-specific override flags."""

    def add_arguments(self, parser: CommandParser) -> None:
        parser.add_argument('--config', type=Path, default=None, help='RunConfig JSON file')
        parser.add_argument('--out', type=Path, required=True, help='Output directory')

    def add_train_arguments(self, parser: CommandParser) -> None:
        parser.add_argument('--epochs', type=int, default=None)
        parser.add_argument('--batch-size', type=int, default=None)
        parser.add_argument('--lr-backbone', type=float, default=None)
        parser.add_argument('--lr-tsh', type=float, default=None)
        parser.add_argument('--seed', type=int, default=None)

    def train_overrides(self, options: dict[str, Any]) -> dict[str, Any]:
        self.require_positive(epochs=options['epochs'], batch_size=options['batch_size'])
        return {
            key: options[key]
            for key in ('epochs', 'batch_size', 'lr_backbone', 'lr_tsh', 'seed')
        }

    def run_config(self, options: dict[str, Any], **sections: dict[str, Any]) -> RunConfig:
        """
        Load ``--config``, apply flag overrides and record the command.

        Flags left at ``None`` do not override file values.
        """
        config = RunConfig.load(options.get('config'), sections)
        return config.replace(command=self.command_echo(options))
