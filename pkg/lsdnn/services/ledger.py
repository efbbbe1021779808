# ===============================
# lsdnn/services/ledger.py
# ===============================
"""
Журнал запусков в БД. Запись best-effort: сбой БД только логируется
и не влияет на артефакты и код выхода.
"""
import logging
import math
import time

from django.db import transaction
from django.utils import timezone

from lsdnn.models import PipelineRun, RunLog

logger = logging.getLogger('lsdnn')


def log_event(run, event, message, severity='info', **kwargs):
    """Утилита для логирования событий"""
    try:
        with transaction.atomic():
            RunLog.objects.create(
                run=run,
                event=event,
                severity=severity,
                message=message,
                **kwargs
            )
    except Exception as e:
        logger.error(f"Failed to log event: {e}")


def json_safe(value):
    """NaN и бесконечности -> None (JSON в SQLite их не допускает)"""
    if isinstance(value, dict):
        return {str(key): json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(item) for item in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class RunLedger:
    """Запись PipelineRun и его событий для одной команды"""

    def __init__(self, command: str, out_dir: str, seed: int, config: dict):
        self.started = time.monotonic()
        self.run = None
        try:
            with transaction.atomic():
                self.run = PipelineRun.objects.create(
                    command=command, out_dir=str(out_dir), seed=seed, config=dict(config),
                )
        except Exception as e:
            logger.error(f"Failed to record run start: {e}")
        log_event(self.run, 'run_start', f"{command} started", extra_data={'out_dir': str(out_dir)})

    def stage(self, stage: str, finished: bool = False, **extra):
        event = 'stage_end' if finished else 'stage_start'
        verb = 'finished' if finished else 'started'
        log_event(self.run, event, f"stage {stage} {verb}", stage=stage, extra_data=json_safe(extra) or None)

    def artifact(self, path, stage: str = ''):
        log_event(self.run, 'artifact_written', str(path), stage=stage)

    def fail(self, exc: Exception, exit_code: int):
        event = 'validation_error' if exit_code == 2 else 'runtime_error'
        log_event(self.run, event, str(exc), severity='error', error_details=repr(exc))
        self.finish('validation_error' if exit_code == 2 else 'failed', exit_code)

    def finish(self, status: str = 'success', exit_code: int = 0):
        duration_ms = int((time.monotonic() - self.started) * 1000)
        log_event(self.run, 'run_end', f"finished with exit code {exit_code}",
                  extra_data={'duration_ms': duration_ms})
        if self.run is None:
            return
        try:
            self.run.status = status
            self.run.exit_code = exit_code
            self.run.duration_ms = duration_ms
            self.run.finished_at = timezone.now()
            with transaction.atomic():
                self.run.save(update_fields=['status', 'exit_code', 'duration_ms', 'finished_at'])
        except Exception as e:
            logger.error(f"Failed to record run end: {e}")
