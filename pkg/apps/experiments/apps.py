"""Experiments application configuration."""
from django.apps import AppConfig


class ExperimentsConfig(AppConfig):
    """Configuration for the experiments application."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.experiments'
    verbose_name = 'Experiments'
