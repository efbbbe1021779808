# ===============================
# optics/services/forward.py
# ===============================
"""
Прямые модели: дифракционно-ограниченная визуализация (DLI) и
безлинзовая количественная фазовая визуализация (QPR).
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from django.db import models
from scipy import ndimage

from optics.exceptions import (
    ForwardKindError,
    OpticsError,
    SamplingCriterionError,
)
from optics.services.raster import (
    FloatRaster,
    dft2,
    frequency_grid,
    idft2,
    require_same_shape,
    require_square,
)

logger = logging.getLogger('optics')

# Шаг пикселя QPR при n=256; для других n масштабируется так,
# чтобы число Френеля n·pitch²/(λz) оставалось тем же
REFERENCE_PITCH = 12e-6
REFERENCE_GRID = 256

# Допустимая величина отрицательных значений, срезаемых после размытия
CLAMP_TOLERANCE = 1e-6


class ForwardKind(models.TextChoices):
    DLI = 'DLI', 'Дифракционно-ограниченная визуализация'
    QPR = 'QPR', 'Фазовая визуализация (Френель)'


class Resample(models.TextChoices):
    FOURIER = 'fourier', 'Спектральная интерполяция'
    BILINEAR = 'bilinear', 'Билинейная интерполяция'


def default_pitch(n: int) -> float:
    return REFERENCE_PITCH * math.sqrt(REFERENCE_GRID / n)


@dataclass(frozen=True)
class ForwardConfig:
    """Физические параметры сценария съемки"""

    kind: str
    n: int = 64
    b: float = 7.0
    wavelength: float = 0.633e-6
    z: float = 50e-3
    pitch: float = None
    resample: str = Resample.FOURIER

    def __post_init__(self):
        if self.kind not in ForwardKind.values:
            raise ForwardKindError(f"unknown forward kind {self.kind!r}")
        if self.resample not in Resample.values:
            raise OpticsError(f"unknown resampling method {self.resample!r}")
        if int(self.n) != self.n or self.n < 2:
            raise OpticsError(f"grid size must be an integer >= 2, got {self.n}")
        if self.pitch is None:
            object.__setattr__(self, "pitch", default_pitch(self.n))
        if not self.pitch > 0:
            raise OpticsError(f"pitch must be positive, got {self.pitch}")
        if self.kind == ForwardKind.DLI:
            if not self.b >= 1:
                raise OpticsError(f"DLI resolving ability b must be >= 1, got {self.b}")
        else:
            if not self.wavelength > 0:
                raise OpticsError(f"wavelength must be positive, got {self.wavelength}")
            if not self.z > 0:
                raise OpticsError(f"propagation distance must be positive, got {self.z}")
            check_sampling(self, self.z)

    @property
    def z_max(self) -> float:
        """Граница критерия дискретизации n·pitch²/λ"""
        return self.n * self.pitch ** 2 / self.wavelength


def check_sampling(cfg: ForwardConfig, z: float):
    if not abs(z) < cfg.z_max:
        raise SamplingCriterionError(abs(z), cfg.z_max)


def _require_kind(cfg: ForwardConfig, kind: str):
    if cfg.kind != kind:
        raise ForwardKindError(f"expected a {kind} configuration, got {cfg.kind}")


def _require_grid(img: FloatRaster, cfg: ForwardConfig):
    require_square(img.shape)
    require_same_shape((cfg.n, cfg.n), img.shape)


def tri(t):
    """Треугольная функция tri(t) = max(0, 1 - |t|)"""
    return np.maximum(0.0, 1.0 - np.abs(t))


def dli_transfer(m: int, n: int, b: float) -> np.ndarray:
    """
    Передаточная функция tri(bu)·tri(bv) на сетке m×m, покрывающей то же поле,
    что исходная сетка n×n (u, v - в циклах на исходный пиксель).
    """
    grid = frequency_grid(m)
    scale = m / n
    return tri(b * grid.u * scale) * tri(b * grid.v * scale)


def _resize_spectrum_axis(spectrum: np.ndarray, m: int, axis: int) -> np.ndarray:
    """Обрезка/дополнение нулями центрированного спектра вдоль одной оси"""
    source = np.moveaxis(spectrum, axis, 0)
    n = source.shape[0]
    if n == m:
        return spectrum.copy()
    target = np.zeros((m,) + source.shape[1:], dtype=np.complex128)
    cn, cm = n // 2, m // 2
    half = (min(n, m) - 1) // 2
    target[cm - half:cm + half + 1] = source[cn - half:cn + half + 1]
    if n < m and n % 2 == 0:
        # непарный бин Найквиста делится поровну между +n/2 и -n/2
        target[cm - n // 2] += source[0] / 2
        target[cm + n // 2] += source[0] / 2
    elif m < n and m % 2 == 0:
        target[0] += source[cn - m // 2] + source[cn + m // 2]
    return np.moveaxis(target, 0, axis)


def fourier_resample(data: np.ndarray, m: int) -> np.ndarray:
    """Спектральная передискретизация квадратного растра n×n -> m×m"""
    n = data.shape[0]
    spectrum = np.fft.fftshift(np.fft.fft2(data))
    spectrum = _resize_spectrum_axis(spectrum, m, 0)
    spectrum = _resize_spectrum_axis(spectrum, m, 1)
    resampled = np.fft.ifft2(np.fft.ifftshift(spectrum)) * (m / n) ** 2
    return resampled.real


def bilinear_resample(data: np.ndarray, m: int) -> np.ndarray:
    """Билинейная передискретизация с периодическим продолжением"""
    n = data.shape[0]
    return ndimage.zoom(data, m / n, order=1, grid_mode=True, mode="grid-wrap")


RESAMPLERS = {
    Resample.FOURIER: fourier_resample,
    Resample.BILINEAR: bilinear_resample,
}


def dli_forward(f: FloatRaster, cfg: ForwardConfig) -> FloatRaster:
    """
    Измерение дифракционно-ограниченной системы g = f ⊗ sinc²(x/b, y/b).

    Размытие применяется в частотной области (tri(bu, bv)) на нечетной сетке
    (n+1)×(n+1): передискретизация вверх, умножение спектра, обратно до n×n.
    Отрицательные остатки срезаются до нуля.
    """
    _require_kind(cfg, ForwardKind.DLI)
    _require_grid(f, cfg)
    n = cfg.n
    m = n + 1
    resample = RESAMPLERS[cfg.resample]

    upsampled = FloatRaster(resample(f.data, m), f.pitch * n / m)
    spectrum = dft2(upsampled)
    blurred = idft2(spectrum.with_data(spectrum.data * dli_transfer(m, n, cfg.b)))
    g = resample(blurred.data, n)

    clamp = float(max(0.0, -g.min()))
    if clamp > CLAMP_TOLERANCE:
        logger.warning(f"DLI output clamped by {clamp:.3e} (input outside [0, 1]?)")
    return FloatRaster(np.maximum(g, 0.0), f.pitch)


def fresnel_transfer(cfg: ForwardConfig, z: float) -> np.ndarray:
    """Передаточная функция Френеля exp(-iπλz(u²+v²)), u, v в циклах на метр"""
    grid = frequency_grid(cfg.n)
    u = grid.u / cfg.pitch
    v = grid.v / cfg.pitch
    return np.exp(-1j * np.pi * cfg.wavelength * z * (u ** 2 + v ** 2))


def fresnel_propagate(field: np.ndarray, cfg: ForwardConfig, z: float) -> np.ndarray:
    """
    Распространение комплексного поля на расстояние z (может быть отрицательным)
    методом передаточной функции.
    """
    _require_kind(cfg, ForwardKind.QPR)
    require_same_shape((cfg.n, cfg.n), field.shape)
    check_sampling(cfg, z)
    spectrum = np.fft.fftshift(np.fft.fft2(field, norm="ortho"))
    spectrum *= fresnel_transfer(cfg, z)
    return np.fft.ifft2(np.fft.ifftshift(spectrum), norm="ortho")


def qpr_forward(phase: FloatRaster, cfg: ForwardConfig) -> FloatRaster:
    """Интенсивность g = |ASP(exp(i·phase))|² после распространения на cfg.z"""
    _require_kind(cfg, ForwardKind.QPR)
    _require_grid(phase, cfg)
    field = np.exp(1j * phase.data)
    propagated = fresnel_propagate(field, cfg, cfg.z)
    return FloatRaster(np.abs(propagated) ** 2, cfg.pitch)


def qpr_background(cfg: ForwardConfig) -> FloatRaster:
    """Фоновый паттерн: измерение объекта с нулевой фазой"""
    return qpr_forward(FloatRaster(np.zeros((cfg.n, cfg.n)), cfg.pitch), cfg)


def normalize_measurement(g: FloatRaster, background: FloatRaster) -> FloatRaster:
    """Вычитание фона и нормировка: (g - background) / mean(background)"""
    require_same_shape(background.shape, g.shape)
    level = float(np.mean(background.data))
    if not level > 0:
        raise OpticsError(f"background mean must be positive, got {level}")
    return g.with_data((g.data - background.data) / level)


def simulate(f: FloatRaster, cfg: ForwardConfig, background: FloatRaster = None) -> FloatRaster:
    """
    Измерение, готовое для подачи в сеть.

    Для DLI - размытый объект; для QPR - интенсивность с вычтенным фоном.
    """
    if cfg.kind == ForwardKind.DLI:
        return dli_forward(f, cfg)
    if background is None:
        background = qpr_background(cfg)
    return normalize_measurement(qpr_forward(f, cfg), background)
