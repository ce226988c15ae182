"""Sensitivity application configuration."""
from django.apps import AppConfig


class SensitivityConfig(AppConfig):
    """Configuration for the sensitivity application."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.sensitivity'
    verbose_name = 'Sensitivity Analysis'
