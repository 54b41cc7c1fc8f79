import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'kfault_lab.settings')
django.setup()
