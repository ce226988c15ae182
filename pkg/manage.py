#!/usr/bin/env python
"""Command-line entry point: ``python manage.py <generate|sensitivity|pretrain|train|scale|compare|report>``."""
import os
import sys


def main() -> None:
    """Dispatch to the toolkit's management commands."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the dependencies with "
            "'pip install -r requirements.txt' inside the project's virtual environment."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
