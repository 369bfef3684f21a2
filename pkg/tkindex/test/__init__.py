default_app_config = "tkindex.test.apps.TkIndexTestAppConfig"
