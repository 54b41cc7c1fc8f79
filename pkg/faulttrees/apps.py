from django.apps import AppConfig


class FaultTreesConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'faulttrees'
    verbose_name = 'k-fault evaluation trees'
