from django.apps import AppConfig


class OpticsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'optics'
    verbose_name = 'Оптика и спектры'
