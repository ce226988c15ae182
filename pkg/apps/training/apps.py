"""Training application configuration."""
from django.apps import AppConfig


class TrainingAppConfig(AppConfig):
    """Configuration for the training application."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.training'
    verbose_name = 'Training'
