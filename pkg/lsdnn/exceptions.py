"""
Ошибки обучения и конвейера LS-DNN
"""


class LsdnnError(Exception):
    """Базовая ошибка пакета lsdnn"""


class CheckpointError(LsdnnError):
    """Файл .lswt или каталог чекпоинта поврежден"""


class TrainingDivergedError(LsdnnError):
    """Потеря или градиент стали нечисловыми"""

    def __init__(self, message: str, epoch: int = None, step: int = None, layer: str = None):
        self.epoch = epoch
        self.step = step
        self.layer = layer
        details = []
        if epoch is not None:
            details.append(f"epoch={epoch}")
        if step is not None:
            details.append(f"step={step}")
        if layer is not None:
            details.append(f"layer={layer}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(f"{message}{suffix}")


class DegenerateInputError(LsdnnError, ValueError):
    """Метрика не определена (нулевая дисперсия или нулевой диапазон)"""


class PipelineStateError(LsdnnError):
    """Не хватает артефактов предыдущей стадии"""


class InputMismatchError(LsdnnError):
    """Входные артефакты не согласуются с конфигурацией запуска или между собой"""
