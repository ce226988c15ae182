"""Backbone application configuration."""
from django.apps import AppConfig


class BackboneAppConfig(AppConfig):
    """Configuration for the backbone application."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.backbone'
    verbose_name = 'Backbone'
