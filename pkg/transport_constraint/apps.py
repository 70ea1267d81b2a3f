from django.apps import AppConfig


class TransportConstraintConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'transport_constraint'
    verbose_name = 'Spinor Transport and Constraint'
