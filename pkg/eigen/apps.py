from django.apps import AppConfig


class EigenConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'eigen'
