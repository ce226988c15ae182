"""
Celery application for the ICF inverse-estimation toolkit.

Study arms of ``scale`` and ``compare --parallel`` run as tasks on this
app; start a worker with ``celery -A config worker``.
"""
import os

from celery import Celery

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')

app = Celery('icf_inverse')

# CELERY_* names in settings.py; eager when no broker is set.
app.config_from_object('django.conf:settings', namespace='CELERY')

# Picks up apps.experiments.tasks.
app.autodiscover_tasks()
