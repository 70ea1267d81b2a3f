from django.apps import AppConfig


class IndexTheoryConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'index_theory'
    verbose_name = 'Index Arithmetic and Spectral Flow'
