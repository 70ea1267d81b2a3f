from django.apps import AppConfig


class SpinDomainConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'spin_domain'
    verbose_name = 'Flat Spin Torus'
