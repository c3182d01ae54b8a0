from django.apps import AppConfig


class CounterexamplesConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'counterexamples'
