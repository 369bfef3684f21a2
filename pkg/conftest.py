import os

import django


os.environ.setdefault("DJANGO_SETTINGS_MODULE", "tkindex.test.settings")
django.setup()
