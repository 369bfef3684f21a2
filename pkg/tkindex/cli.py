"""`tkindex` console script: the management command without a Django project."""
import os
import sys

import django
from django.conf import settings


def configure():
    if os.environ.get("DJANGO_SETTINGS_MODULE") or settings.configured:
        return
    settings.configure(
        INSTALLED_APPS=["tkindex"],
        LOGGING={
            "version": 1,
            "disable_existing_loggers": False,
            "handlers": {"console": {"class": "logging.StreamHandler"}},
            "loggers": {"tkindex": {"handlers": ["console"], "level": "INFO"}},
        },
    )


def main(argv=None):
    configure()
    django.setup()

    from tkindex.management.commands.tkindex import Command

    argv = list(sys.argv[1:] if argv is None else argv)
    # run_from_argv turns CommandError into its exit code
    Command().run_from_argv(["tkindex", "tkindex"] + argv)


if __name__ == "__main__":
    main()
