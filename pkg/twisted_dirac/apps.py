from django.apps import AppConfig


class TwistedDiracConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'twisted_dirac'
    verbose_name = 'Dirac Operator Along Maps'
