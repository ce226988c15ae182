"""
Base class for the toolkit's management commands.

Commands implement :meth:`InversionCommand.run`; any
:class:`apps.core.exceptions.InversionError` escaping it is logged and
turned into a ``CommandError`` carrying the error's exit code.
"""
import logging
from pathlib import Path
from typing import Any

from django.core.management.base import BaseCommand, CommandError, CommandParser

from apps.core.exceptions import InversionError, ParameterError, log_exception

logger = logging.getLogger('icf_inverse')

# Options every Django command carries; they are not echoed into run configs.
BASE_OPTIONS = frozenset({
    'verbosity', 'settings', 'pythonpath', 'traceback', 'no_color', 'force_color', 'skip_checks',
})


def parse_fractions(text: str) -> list[float]:
    """
    Parse ``0.05,0.10,...`` into floats.

    Raises:
        ParameterError: On an empty list or a non-numeric entry.
    """
    try:
        values = [float(part) for part in text.split(',') if part.strip()]
    except ValueError as exc:
        raise ParameterError(f'fractions must be comma-separated numbers, got {text!r}') from exc
    if not values:
        raise ParameterError('at least one fraction is required')
    return values


class InversionCommand(BaseCommand):
    """
    Management command with toolkit error mapping.

    Exit codes: 2 for usage and validation errors, 3 for I/O and format
    errors, 4 for numerical aborts.
    """

    requires_system_checks: list[str] = []
    requires_migrations_checks = False

    def add_arguments(self, parser: CommandParser) -> None:
        pass

    def handle(self, *args: Any, **options: Any) -> str | None:
        try:
            return self.run(**options)
        except InversionError as exc:
            log_exception(exc, self.command_name)
            raise CommandError(f'{exc.code}: {exc.detail}', returncode=exc.exit_code) from exc

    def run(self, **options: Any) -> str | None:
        raise NotImplementedError

    @property
    def command_name(self) -> str:
        return self.__module__.rsplit('.', 1)[-1]

    def command_echo(self, options: dict[str, Any]) -> dict[str, Any]:
        """The ``command`` section of ``effective_config.json``."""
        flags = {
            key: str(value) if isinstance(value, Path) else value
            for key, value in sorted(options.items())
            if key not in BASE_OPTIONS
        }
        return {'name': self.command_name, 'flags': flags}

    def require_positive(self, **values: int | None) -> None:
        """Reject non-positive integer flags with exit code 2."""
        for name, value in values.items():
            if value is not None and value < 1:
                raise CommandError(f'--{name.replace("_", "-")} must be at least 1, got {value}', returncode=2)

    def done(self, message: str) -> None:
        logger.info(message)
        self.stdout.write(self.style.SUCCESS(message))
