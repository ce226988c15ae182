"""Task-specific head application configuration."""
from django.apps import AppConfig


class TSHAppConfig(AppConfig):
    """Configuration for the tsh application."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.tsh'
    verbose_name = 'Task-Specific Head'
