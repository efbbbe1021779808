# Generated by Django 4.2.7

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='PipelineRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(max_length=50, verbose_name='Команда')),
                ('out_dir', models.CharField(max_length=500, verbose_name='Каталог вывода')),
                ('seed', models.BigIntegerField(blank=True, null=True, verbose_name='Зерно')),
                ('config', models.JSONField(default=dict, verbose_name='Конфигурация')),
                ('status', models.CharField(choices=[('running', 'Выполняется'), ('success', 'Успешно'), ('validation_error', 'Ошибка валидации'), ('failed', 'Ошибка выполнения')], default='running', max_length=20, verbose_name='Статус')),
                ('exit_code', models.IntegerField(blank=True, null=True, verbose_name='Код выхода')),
                ('duration_ms', models.IntegerField(blank=True, null=True, verbose_name='Длительность (мс)')),
                ('started_at', models.DateTimeField(auto_now_add=True, verbose_name='Начало')),
                ('finished_at', models.DateTimeField(blank=True, null=True, verbose_name='Окончание')),
            ],
            options={
                'verbose_name': 'Запуск конвейера',
                'verbose_name_plural': 'Запуски конвейера',
                'ordering': ['-started_at'],
            },
        ),
        migrations.CreateModel(
            name='RunLog',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('event', models.CharField(choices=[('run_start', 'Начало запуска'), ('stage_start', 'Начало стадии'), ('stage_end', 'Конец стадии'), ('artifact_written', 'Записан артефакт'), ('validation_error', 'Ошибка валидации'), ('runtime_error', 'Ошибка выполнения'), ('run_end', 'Конец запуска')], max_length=20, verbose_name='Событие')),
                ('severity', models.CharField(choices=[('info', 'Информация'), ('warning', 'Предупреждение'), ('error', 'Ошибка'), ('critical', 'Критическая ошибка')], default='info', max_length=10, verbose_name='Важность')),
                ('message', models.TextField(verbose_name='Сообщение')),
                ('stage', models.CharField(blank=True, max_length=50, verbose_name='Стадия')),
                ('error_details', models.TextField(blank=True, verbose_name='Детали ошибки')),
                ('timestamp', models.DateTimeField(auto_now_add=True, verbose_name='Время')),
                ('extra_data', models.JSONField(blank=True, null=True, verbose_name='Дополнительные данные')),
                ('run', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.CASCADE, related_name='logs', to='lsdnn.pipelinerun', verbose_name='Запуск')),
            ],
            options={
                'verbose_name': 'Событие запуска',
                'verbose_name_plural': 'События запусков',
                'ordering': ['timestamp', 'id'],
            },
        ),
    ]
