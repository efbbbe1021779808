from django.db import models


class PipelineRun(models.Model):
    """Запуск management-команды"""

    STATUS_CHOICES = [
        ('running', 'Выполняется'),
        ('success', 'Успешно'),
        ('validation_error', 'Ошибка валидации'),
        ('failed', 'Ошибка выполнения'),
    ]

    command = models.CharField(max_length=50, verbose_name='Команда')
    out_dir = models.CharField(max_length=500, verbose_name='Каталог вывода')
    seed = models.BigIntegerField(null=True, blank=True, verbose_name='Зерно')
    config = models.JSONField(default=dict, verbose_name='Конфигурация')
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='running',
                              verbose_name='Статус')
    exit_code = models.IntegerField(null=True, blank=True, verbose_name='Код выхода')
    duration_ms = models.IntegerField(null=True, blank=True, verbose_name='Длительность (мс)')
    started_at = models.DateTimeField(auto_now_add=True, verbose_name='Начало')
    finished_at = models.DateTimeField(null=True, blank=True, verbose_name='Окончание')

    class Meta:
        verbose_name = 'Запуск конвейера'
        verbose_name_plural = 'Запуски конвейера'
        ordering = ['-started_at']

    def __str__(self):
        return f"{self.command} -> {self.out_dir} ({self.get_status_display()})"

    @property
    def is_finished(self):
        return self.status != 'running'


class RunLog(models.Model):
    """Событие внутри запуска"""

    EVENT_CHOICES = [
        ('run_start', 'Начало запуска'),
        ('stage_start', 'Начало стадии'),
        ('stage_end', 'Конец стадии'),
        ('artifact_written', 'Записан артефакт'),
        ('validation_error', 'Ошибка валидации'),
        ('runtime_error', 'Ошибка выполнения'),
        ('run_end', 'Конец запуска'),
    ]

    SEVERITY_CHOICES = [
        ('info', 'Информация'),
        ('warning', 'Предупреждение'),
        ('error', 'Ошибка'),
        ('critical', 'Критическая ошибка'),
    ]

    run = models.ForeignKey(PipelineRun, on_delete=models.CASCADE, null=True, blank=True,
                            related_name='logs', verbose_name='Запуск')
    event = models.CharField(max_length=20, choices=EVENT_CHOICES, verbose_name='Событие')
    severity = models.CharField(max_length=10, choices=SEVERITY_CHOICES, default='info',
                                verbose_name='Важность')
    message = models.TextField(verbose_name='Сообщение')
    stage = models.CharField(max_length=50, blank=True, verbose_name='Стадия')
    error_details = models.TextField(blank=True, verbose_name='Детали ошибки')
    timestamp = models.DateTimeField(auto_now_add=True, verbose_name='Время')
    extra_data = models.JSONField(null=True, blank=True, verbose_name='Дополнительные данные')

    class Meta:
        verbose_name = 'Событие запуска'
        verbose_name_plural = 'События запусков'
        ordering = ['timestamp', 'id']

    def __str__(self):
        return f"[{self.severity}] {self.event}: {self.message[:60]}"
