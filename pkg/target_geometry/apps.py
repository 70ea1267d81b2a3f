from django.apps import AppConfig


class TargetGeometryConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'target_geometry'
    verbose_name = 'Embedded Target Geometry'
