"""
Django settings for the specrnet project.

Only the settings layer, the logging configuration and the management
commands of Django are used: no database, no web surface.

Local values are read from a YAML file, see SETTINGS_FILE below.
"""
import os
import yaml

from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


server_settings = {}
SETTINGS_FILE = (
    "SETTINGS_FILE" in os.environ
    and os.environ["SETTINGS_FILE"]
    or "/etc/django/settings-specrnet.yaml"
)
try:
    with open(SETTINGS_FILE, "r") as f:
        server_settings = yaml.safe_load(f) or {}
except FileNotFoundError:
    pass

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = server_settings.get('SECRET_KEY', 'django-insecure-specrnet-local-commands-only')

DEBUG = server_settings.get('DEBUG', False)

# Application definition

INSTALLED_APPS = [
    "detector",
]

DATABASES = {}

# Default primary key field type
DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

USE_TZ = True

# It is considered quite unsafe to use the /tmp directory, so we might as well use a dedicated root folder in HOME
base_folder = f"{os.environ.get('HOME')}/.specrnet"

# LFCC feature cache, the environment variable wins over the YAML file
SPECRNET_CACHE_DIR = os.environ.get(
    "SPECRNET_CACHE_DIR",
    server_settings.get("SPECRNET_CACHE_DIR", f"{base_folder}/cache"),
)
CHECKPOINT_DIR = server_settings.get("CHECKPOINT_DIR", f"{base_folder}/checkpoints")

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': server_settings.get(
            "LOG_LEVEL", os.environ.get("DJANGO_LOG_LEVEL", "INFO")
        ),
    },
}
