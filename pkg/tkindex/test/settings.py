"""
Django settings for the tkindex test run.

Only what the management command and the test runner need: no models are
defined, so the database is an in-memory sqlite.
"""

import os

PROJECT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
BASE_DIR = os.path.dirname(PROJECT_DIR)

SECRET_KEY = "tkindex-tests-only"

DEBUG = True

INSTALLED_APPS = [
    "tkindex",
    "tkindex.test",
]

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": ":memory:",
    }
}

USE_TZ = True

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "handlers": {
        "console": {"class": "logging.StreamHandler"},
    },
    "loggers": {
        "tkindex": {
            "handlers": ["console"],
            "level": "WARNING",
        },
    },
}
