"""
Django settings for the ICF inverse-estimation toolkit.

The project has no web surface: Django provides settings, app discovery,
logging configuration and management commands.
"""
import os
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('SECRET_KEY', 'icf-inverse-local-only')

DEBUG = os.getenv('DEBUG', 'False').lower() in ('true', '1', 'yes')

ALLOWED_HOSTS: list[str] = []

# Application definition
DJANGO_APPS = [
    'django.contrib.contenttypes',
]

THIRD_PARTY_APPS = [
    'rest_framework',
]

LOCAL_APPS = [
    'apps.core',
    'apps.tensor_core',
    'apps.backbone',
    'apps.tsh',
    'apps.sensitivity',
    'apps.datasets',
    'apps.training',
    'apps.experiments',
]

INSTALLED_APPS = DJANGO_APPS + THIRD_PARTY_APPS + LOCAL_APPS

# Commands keep no state in the database; sqlite satisfies Django's checks.
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST Framework Configuration (serializers only)
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'DEFAULT_PARSER_CLASSES': [
        'rest_framework.parsers.JSONParser',
    ],
}

# Logging Configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
        'json': {
            'format': '{"level": "%(levelname)s", "time": "%(asctime)s", "module": "%(module)s", "message": "%(message)s"}',
        },
    },
    'handlers': {
        'console': {
            'level': 'DEBUG',
            'class': 'logging.StreamHandler',
            'formatter': os.getenv('LOG_FORMAT', 'simple'),
        },
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': os.getenv('LOG_LEVEL', 'INFO'),
            'propagate': True,
        },
        'icf_inverse': {
            'handlers': ['console'],
            'level': os.getenv('LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}

# Toolkit settings
ICF_INVERSE = {
    'DATA_ROOT': Path(os.getenv('ICF_DATA_ROOT', str(BASE_DIR / 'data'))),
    'RUNS_ROOT': Path(os.getenv('ICF_RUNS_ROOT', str(BASE_DIR / 'runs'))),
    'DEFAULT_SEED': int(os.getenv('ICF_DEFAULT_SEED', '7')),
    'IMAGE_SIZE': int(os.getenv('ICF_IMAGE_SIZE', '16')),
    'NOISE_SIGMA': float(os.getenv('ICF_NOISE_SIGMA', '1e-2')),
    'DEAD_PARAM_AMPLITUDE': float(os.getenv('ICF_DEAD_PARAM_AMPLITUDE', '1e-3')),
    'SENSITIVITY_COMPONENTS': int(os.getenv('ICF_SENSITIVITY_COMPONENTS', '32')),
    'SENSITIVITY_LAMBDA': float(os.getenv('ICF_SENSITIVITY_LAMBDA', '1.0')),
    'R2_THRESHOLD': float(os.getenv('ICF_R2_THRESHOLD', '0.2')),
    'LOG_EVERY_EPOCHS': int(os.getenv('ICF_LOG_EVERY_EPOCHS', '1')),
}

# Celery Configuration (study fan-out)
CELERY_BROKER_URL = os.getenv('CELERY_BROKER_URL', os.getenv('REDIS_URL', ''))
CELERY_RESULT_BACKEND = os.getenv('CELERY_RESULT_BACKEND', CELERY_BROKER_URL)
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE
# Without a broker every task runs in the calling process.
CELERY_TASK_ALWAYS_EAGER = not CELERY_BROKER_URL
CELERY_TASK_EAGER_PROPAGATES = True
