default_app_config = "tkindex.apps.TkIndexAppConfig"


VERSION = (0, 1, 0)
__version__ = ".".join(map(str, VERSION))
