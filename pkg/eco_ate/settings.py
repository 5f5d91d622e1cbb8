"""
Django settings for the eco_ate project.

The project hosts a federated estimation toolkit (``fusion``) and a Monte Carlo
laboratory (``simlab``). There is no web surface: Django provides configuration,
management commands, the ORM for recorded simulation runs and the Celery wiring.
"""

import os
from pathlib import Path

import dj_database_url

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment variables from .env file
try:
    from dotenv import load_dotenv

    load_dotenv(BASE_DIR / ".env")
except ImportError:
    # python-dotenv not installed, skip loading .env file
    pass


def _env_bool(name, default):
    return os.getenv(name, default).lower() in ("true", "1", "yes", "on")


def _env_float(name, default):
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


DEBUG = _env_bool("DEBUG", "False")

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv(
    "SECRET_KEY", "django-insecure-dev-key-only-for-development-do-not-use-in-production"
)

ALLOWED_HOSTS = os.getenv("ALLOWED_HOSTS", "localhost,127.0.0.1").split(",")

# Application definition

INSTALLED_APPS = [
    "django.contrib.auth",
    "django.contrib.contenttypes",
    "rest_framework",
    "fusion",
    "simlab",
]

# Database configuration - use DATABASE_URL if available, otherwise a local SQLite file
if os.getenv("DATABASE_URL"):
    DATABASES = {"default": dj_database_url.parse(os.getenv("DATABASE_URL"))}
else:
    DATABASES = {
        "default": {
            "ENGINE": "django.db.backends.sqlite3",
            "NAME": os.getenv("DB_NAME", str(BASE_DIR / "eco_ate.sqlite3")),
        }
    }

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# Environment Configuration
ENVIRONMENT = os.getenv("ENVIRONMENT", "local").lower()

# Build identifier stamped on every run; falls back to git when unset
ECO_ATE_BUILD_ID = os.getenv("ECO_ATE_BUILD_ID", "")

# Estimation knobs shared protocol-wide; see fusion.config.EstimationConfig
ECO_ATE = {
    "SIEVE_DEGREE": int(os.getenv("ECO_ATE_SIEVE_DEGREE", "3")),
    "RIDGE": _env_float("ECO_ATE_RIDGE", 1e-8),
    "PROPENSITY_CLAMP": _env_float("ECO_ATE_PROPENSITY_CLAMP", 0.01),
    "KERNEL_BANDWIDTH": _env_float("ECO_ATE_KERNEL_BANDWIDTH", None),
    "FUSION_WEIGHTING": os.getenv("ECO_ATE_FUSION_WEIGHTING", "uniform"),
    "SOURCE_POLICY": os.getenv("ECO_ATE_SOURCE_POLICY", "exclude"),
    "OVERLAP_WARN_RATIO": _env_float("ECO_ATE_OVERLAP_WARN_RATIO", 100.0),
    "NORMALIZER_FLOOR": _env_float("ECO_ATE_NORMALIZER_FLOOR", 1e-6),
    "PINV_TOL": _env_float("ECO_ATE_PINV_TOL", 1e-10),
    "SCORE_CENTERING": os.getenv("ECO_ATE_SCORE_CENTERING", "kernel"),
    "ROUND_TIMEOUT": _env_float("ECO_ATE_ROUND_TIMEOUT", 60.0),
    "MC_WORKERS": int(os.getenv("ECO_ATE_MC_WORKERS", "1")),
    "RESULTS_DIR": os.getenv("ECO_ATE_RESULTS_DIR", str(BASE_DIR / "results")),
}

# Celery Configuration (Redis broker)
CELERY_BROKER_URL = os.getenv("CELERY_BROKER_URL", "redis://localhost:6379/0")
CELERY_RESULT_BACKEND = os.getenv("CELERY_RESULT_BACKEND", "redis://localhost:6379/0")
CELERY_ACCEPT_CONTENT = ["json"]
CELERY_TASK_SERIALIZER = "json"
CELERY_RESULT_SERIALIZER = "json"
CELERY_TIMEZONE = "UTC"
CELERY_TASK_ALWAYS_EAGER = _env_bool("CELERY_TASK_ALWAYS_EAGER", "False")

# Logging
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "standard": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "standard",
        },
    },
    "loggers": {
        "common": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
        "fusion": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
        "simlab": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
        "eco_ate": {"handlers": ["console"], "level": LOG_LEVEL, "propagate": False},
    },
}

# Django REST Framework (serializers only; no API views are exposed)
REST_FRAMEWORK = {
    "DEFAULT_RENDERER_CLASSES": [
        "rest_framework.renderers.JSONRenderer",
    ],
    "UNAUTHENTICATED_USER": None,
}
