# ===============================
# optics/services/raster.py
# ===============================
"""
Контейнеры изображений и спектров, соглашения ДПФ и формат файла .fras.

Соглашения:
    - унитарное ДПФ (norm="ortho") в обе стороны, поэтому выполняется Парсеваль;
    - спектр всегда хранится с DC в центре (fftshift), нецентрированная
      раскладка не выходит за пределы этого модуля;
    - частоты в циклах на пиксель, бин k -> (k - floor(n/2)) / n.
"""
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from optics.exceptions import (
    HermitianResidueError,
    NonFiniteError,
    OpticsError,
    RasterFormatError,
    ShapeMismatchError,
    TruncatedRasterError,
)
from optics.utils.files import atomic_write_bytes

logger = logging.getLogger('optics')

# Мнимый остаток после idft2, который еще считается шумом округления
IMAG_TOLERANCE = 1e-9

FRAS_MAGIC = b"FRAS"
FRAS_VERSION = 1
# magic, version, height, width, pitch
FRAS_HEADER = struct.Struct("<4sBIId")


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class FloatRaster:
    """Вещественное изображение с физическим шагом пикселя (м/пиксель)"""

    data: np.ndarray
    pitch: float = 1.0

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise OpticsError(f"raster must be 2-D, got shape {data.shape}")
        if data.shape[0] < 2 or data.shape[1] < 2:
            raise OpticsError(f"raster must be at least 2x2, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteError("raster contains non-finite values")
        if not (np.isfinite(self.pitch) and self.pitch > 0):
            raise OpticsError(f"pitch must be positive, got {self.pitch}")
        object.__setattr__(self, "data", _readonly(data))
        object.__setattr__(self, "pitch", float(self.pitch))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def n(self) -> int:
        """Размер квадратной сетки"""
        require_square(self.shape)
        return self.height

    def with_data(self, data) -> "FloatRaster":
        return FloatRaster(data, self.pitch)


@dataclass(frozen=True)
class Spectrum:
    """Комплексный спектр с DC в центре; du, dv в циклах на метр"""

    data: np.ndarray
    du: float
    dv: float

    def __post_init__(self):
        data = np.array(self.data, dtype=np.complex128)
        if data.ndim != 2:
            raise OpticsError(f"spectrum must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteError("spectrum contains non-finite values")
        object.__setattr__(self, "data", _readonly(data))

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def pitch(self) -> float:
        return 1.0 / (self.shape[1] * self.du)

    def with_data(self, data) -> "Spectrum":
        return Spectrum(data, self.du, self.dv)


@dataclass(frozen=True)
class FrequencyGrid:
    """Частоты (u, v) каждого бина в циклах на пиксель, DC в центре"""

    n: int
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    @property
    def r(self) -> np.ndarray:
        return np.sqrt(self.u ** 2 + self.v ** 2)

    @property
    def center(self) -> int:
        return self.n // 2


def require_square(shape) -> int:
    if len(shape) != 2 or shape[0] != shape[1]:
        raise ShapeMismatchError((shape[0], shape[0]), shape, what="square grid")
    return shape[0]


def require_same_shape(expected, actual):
    if tuple(expected) != tuple(actual):
        raise ShapeMismatchError(expected, actual)


def frequency_axis(n: int) -> np.ndarray:
    if n < 2:
        raise OpticsError(f"grid size must be >= 2, got {n}")
    return (np.arange(n) - n // 2) / n


def frequency_grid(n: int) -> FrequencyGrid:
    """
    Сетка частот для квадратного n×n растра.

    u меняется вдоль столбцов (ось x), v - вдоль строк (ось y).
    """
    axis = frequency_axis(n)
    v, u = np.meshgrid(axis, axis, indexing="ij")
    return FrequencyGrid(n=n, u=_readonly(u), v=_readonly(v))


def dft2(img: FloatRaster) -> Spectrum:
    """Унитарное прямое ДПФ с переносом DC в центр"""
    data = np.fft.fftshift(np.fft.fft2(img.data, norm="ortho"))
    return Spectrum(
        data,
        du=1.0 / (img.width * img.pitch),
        dv=1.0 / (img.height * img.pitch),
    )


def idft2(spec: Spectrum) -> FloatRaster:
    """
    Унитарное обратное ДПФ центрированного спектра.

    Raises:
        HermitianResidueError: мнимая часть больше IMAG_TOLERANCE,
            т.е. спектр не эрмитов
    """
    field_ = np.fft.ifft2(np.fft.ifftshift(spec.data), norm="ortho")
    residue = float(np.max(np.abs(field_.imag))) if field_.size else 0.0
    if residue > IMAG_TOLERANCE:
        raise HermitianResidueError(
            f"inverse DFT left imaginary residue {residue:.3e} > {IMAG_TOLERANCE:.0e}; "
            f"spectrum is not Hermitian"
        )
    return FloatRaster(field_.real, spec.pitch)


def hermitian_defect(spec: Spectrum) -> float:
    """
    Максимальное отклонение от сопряженной симметрии F(-k) = conj(F(k)).

    Для четного n непарные строка/столбец Найквиста (индекс 0 в центрированной
    раскладке) исключаются.
    """
    data = spec.data
    rows, cols = data.shape
    r0 = 1 if rows % 2 == 0 else 0
    c0 = 1 if cols % 2 == 0 else 0
    core = data[r0:, c0:]
    mirrored = np.conj(core[::-1, ::-1])
    return float(np.max(np.abs(core - mirrored)))


def write_raster(img: FloatRaster, path) -> Path:
    """Записывает растр в формате .fras (float32, little-endian, построчно)"""
    values = np.ascontiguousarray(img.data, dtype="<f4")
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"raster for {path} overflows float32")
    header = FRAS_HEADER.pack(FRAS_MAGIC, FRAS_VERSION, img.height, img.width, img.pitch)
    return atomic_write_bytes(path, header + values.tobytes())


def read_raster(path) -> FloatRaster:
    """
    Читает .fras файл.

    Raises:
        RasterFormatError: неверная сигнатура/версия/размеры или лишние байты
        TruncatedRasterError: данных меньше, чем объявлено
        NonFiniteError: в данных NaN/inf
    """
    payload = Path(path).read_bytes()
    if payload[:4] != FRAS_MAGIC:
        raise RasterFormatError(f"{path}: bad magic {payload[:4]!r}, expected {FRAS_MAGIC!r}")
    if len(payload) < FRAS_HEADER.size:
        raise TruncatedRasterError(f"{path}: header truncated at {len(payload)} bytes")
    _, version, height, width, pitch = FRAS_HEADER.unpack_from(payload)
    if version != FRAS_VERSION:
        raise RasterFormatError(f"{path}: unsupported version {version}")
    if height < 2 or width < 2:
        raise RasterFormatError(f"{path}: invalid dimensions {height}x{width}")
    expected = height * width * 4
    body = payload[FRAS_HEADER.size:]
    if len(body) < expected:
        raise TruncatedRasterError(
            f"{path}: header advertises {height}x{width} ({expected} bytes), "
            f"payload has {len(body)} bytes"
        )
    if len(body) > expected:
        raise RasterFormatError(f"{path}: {len(body) - expected} trailing bytes after payload")
    values = np.frombuffer(body, dtype="<f4").reshape(height, width)
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"{path}: payload contains non-finite values")
    return FloatRaster(values, pitch)
