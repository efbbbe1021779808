from django.apps import AppConfig


class LsdnnConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'lsdnn'
    verbose_name = 'LS-DNN: обучение и оценка'
