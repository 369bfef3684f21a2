from django.apps import AppConfig


class TkIndexAppConfig(AppConfig):
    label = "tkindex"
    name = "tkindex"
    verbose_name = "Twisted index workbench"
