# ===============================
# lsdnn/management/commands/_base.py
# ===============================
"""
Общая основа команд конвейера: сборка конфигурации, печать раскрытой
конфигурации, журнал запуска и коды выхода.

Приоритет значений: settings.LSDNN_DEFAULTS < --config < --set < --seed/--out.
Коды выхода: 0 успех, 2 ошибка валидации или нет нужных артефактов,
1 ошибка выполнения.
"""
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from lsdnn.exceptions import InputMismatchError, PipelineStateError
from lsdnn.forms import RunConfigForm
from lsdnn.services.ledger import RunLedger
from optics.exceptions import ForwardKindError, SamplingCriterionError
from optics.utils.files import atomic_write_text, format_key_value, read_key_value

logger = logging.getLogger('lsdnn')

RUN_CONFIG_NAME = "run_config.txt"

# Код 2: конфигурация или входные артефакты; все остальное - ошибка выполнения (код 1)
VALIDATION_ERRORS = (
    FileExistsError,
    FileNotFoundError,
    PipelineStateError,
    InputMismatchError,
    SamplingCriterionError,
    ForwardKindError,
)


def _as_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class PipelineCommand(BaseCommand):
    """Базовая команда; подклассы реализуют run(config, options)"""

    command_name = ""

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Файл конфигурации "key = value"')
        parser.add_argument('--seed', type=int, help='Зерно генераторов')
        parser.add_argument('--out', help='Каталог запуска')
        parser.add_argument('--force', action='store_true',
                            help='Перезаписать непустой каталог вывода')
        parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                            dest='overrides', help='Переопределить значение конфигурации')
        parser.add_argument('--print-config', action='store_true',
                            help='Напечатать раскрытую конфигурацию и выйти')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    # --- конфигурация -------------------------------------------------

    def collect_values(self, options) -> dict:
        known = settings.LSDNN_DEFAULTS
        values = {key: _as_text(value) for key, value in known.items()}

        config_path = options.get('config')
        if config_path:
            try:
                from_file = read_key_value(config_path)
            except FileNotFoundError:
                raise CommandError(f"config file not found: {config_path}", returncode=2)
            except ValueError as e:
                raise CommandError(str(e), returncode=2)
            unknown = sorted(set(from_file) - set(known))
            if unknown:
                raise CommandError(f"{config_path}: unknown config keys: {', '.join(unknown)}",
                                   returncode=2)
            values.update(from_file)

        for item in options.get('overrides') or []:
            if '=' not in item:
                raise CommandError(f"--set expects KEY=VALUE, got {item!r}", returncode=2)
            key, value = (part.strip() for part in item.split('=', 1))
            if key not in known:
                raise CommandError(f"--set: unknown config key {key!r}", returncode=2)
            values[key] = value

        if options.get('seed') is not None:
            values['seed'] = str(options['seed'])
        if options.get('out'):
            values['out'] = options['out']
        return values

    def load_config(self, options) -> RunConfigForm:
        form = RunConfigForm(data=self.collect_values(options))
        if not form.is_valid():
            raise CommandError(f"invalid configuration: {form.error_text()}", returncode=2)
        return form

    # --- выполнение ---------------------------------------------------

    def handle(self, *args, **options):
        config = self.load_config(options)
        resolved = config.resolved()
        self.stdout.write(format_key_value(resolved, header=f"resolved config: {self.command_name}"))
        if options.get('print_config'):
            return

        self.out_dir = Path(resolved['out'])
        self.options = options
        self.ledger = RunLedger(self.command_name, self.out_dir, config.cleaned_data['seed'], resolved)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            atomic_write_text(
                self.out_dir / RUN_CONFIG_NAME,
                format_key_value(resolved, header=f"resolved config: {self.command_name}"),
            )
            self.run(config, options)
        except CommandError as e:
            self.ledger.fail(e, e.returncode)
            raise
        except VALIDATION_ERRORS as e:
            logger.error(f"{self.command_name}: {e}")
            self.ledger.fail(e, 2)
            raise CommandError(str(e), returncode=2)
        except Exception as e:
            logger.error(f"{self.command_name} failed: {e}", exc_info=True)
            self.ledger.fail(e, 1)
            raise CommandError(f"{self.command_name} failed: {e}", returncode=1)
        self.ledger.finish()

    def run(self, config: RunConfigForm, options):
        raise NotImplementedError

    # --- помощники для подклассов ----------------------------------------

    def stage_dir(self, name: str) -> Path:
        return self.out_dir / name

    def require_path(self, path: Path, produced_by: str) -> Path:
        if not path.exists():
            raise PipelineStateError(f"missing prerequisite {path} (run {produced_by} first)")
        return path

    def written(self, path, stage: str = ''):
        self.ledger.artifact(path, stage)
        self.stdout.write(f"wrote {path}")
