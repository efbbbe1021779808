"""
Ошибки оптического ядра: растры, спектры, прямые модели
"""


class OpticsError(ValueError):
    """Базовая ошибка пакета optics"""


class NonFiniteError(OpticsError):
    """В данных встретились NaN или бесконечность"""


class ShapeMismatchError(OpticsError):
    """Размеры растров/спектров не совпадают"""

    def __init__(self, expected, actual, what: str = "shape"):
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        super().__init__(f"{what} mismatch: expected {self.expected}, got {self.actual}")


class RasterFormatError(OpticsError):
    """Файл .fras поврежден или имеет неверный заголовок"""


class TruncatedRasterError(RasterFormatError):
    """Полезная нагрузка .fras короче, чем объявлено в заголовке"""


class HermitianResidueError(OpticsError):
    """После обратного ДПФ осталась заметная мнимая часть"""


class SamplingCriterionError(OpticsError):
    """Нарушен критерий дискретизации Френеля z < n·pitch²/λ"""

    def __init__(self, z: float, z_max: float):
        self.z = z
        self.z_max = z_max
        super().__init__(
            f"Fresnel sampling criterion violated: z={z:.6g} m must be below "
            f"n*pitch^2/lambda={z_max:.6g} m"
        )


class ForwardKindError(OpticsError):
    """Конфигурация прямой модели не того типа"""
