# ===============================
# optics/services/spectral.py
# ===============================
"""
Спектральная предмодуляция целевых изображений и анализ спектральной
плотности мощности (PSD).
"""
import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from django.conf import settings
from django.db import models

from optics.exceptions import OpticsError
from optics.services.raster import (
    FloatRaster,
    FrequencyGrid,
    dft2,
    frequency_grid,
    idft2,
    require_same_shape,
    require_square,
)
from optics.utils.files import atomic_write_text

logger = logging.getLogger('optics')

# Диапазон частот для аппроксимации наклона PSD (циклы на пиксель)
DEFAULT_FIT_RANGE = (0.05, 0.45)
MIN_FIT_BINS = 4


class ProfileKind(models.TextChoices):
    DIAGONAL = 'diagonal', 'Главная диагональ'
    RADIAL = 'radial', 'Радиальное среднее'


@dataclass(frozen=True)
class ModulationFilter:
    """Фильтр предмодуляции T(u, v) = r^p"""

    p: float
    grid: FrequencyGrid = field(repr=False)

    def __post_init__(self):
        if self.p < 0:
            raise OpticsError(f"modulation exponent must be >= 0, got {self.p}")

    @classmethod
    def for_grid(cls, n: int, p: float) -> "ModulationFilter":
        return cls(p=p, grid=frequency_grid(n))

    @property
    def values(self) -> np.ndarray:
        if self.p == 0:
            return np.ones((self.grid.n, self.grid.n))
        values = self.grid.r ** self.p
        # при p > 0 r^p -> 0 в DC
        c = self.grid.center
        values[c, c] = 0.0
        return values


@dataclass(frozen=True)
class PsdProfile:
    """Одномерный срез PSD"""

    frequencies: np.ndarray
    power: np.ndarray
    kind: str = ProfileKind.DIAGONAL

    def __post_init__(self):
        frequencies = np.asarray(self.frequencies, dtype=np.float64)
        power = np.asarray(self.power, dtype=np.float64)
        if frequencies.shape != power.shape or frequencies.ndim != 1:
            raise OpticsError("profile frequencies and power must be 1-D of equal length")
        if np.any(np.diff(frequencies) <= 0):
            raise OpticsError("profile frequencies must be strictly increasing")
        if np.any(power < 0):
            raise OpticsError("profile power must be non-negative")
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "power", power)


def premodulate(f: FloatRaster, p: float) -> FloatRaster:
    """
    Предмодуляция: F̃ = F·r^p. При p = 0 фильтр тождественный,
    и растр возвращается без изменений.
    """
    if p < 0:
        raise OpticsError(f"premodulation exponent must be >= 0, got {p} (use demodulate)")
    if p == 0:
        return f
    n = require_square(f.shape)
    spectrum = dft2(f)
    gain = ModulationFilter.for_grid(n, p).values
    return idft2(spectrum.with_data(spectrum.data * gain))


def demodulate(ftilde: FloatRaster, p: float) -> FloatRaster:
    """Обратная операция вне DC: деление спектра на r^p, DC остается нулем"""
    if not p > 0:
        raise OpticsError(f"demodulation exponent must be > 0, got {p}")
    n = require_square(ftilde.shape)
    grid = frequency_grid(n)
    r = grid.r
    c = grid.center
    r[c, c] = 1.0
    gain = 1.0 / r ** p
    gain[c, c] = 0.0
    spectrum = dft2(ftilde)
    return idft2(spectrum.with_data(spectrum.data * gain))


def _power(img: FloatRaster) -> np.ndarray:
    return np.abs(dft2(img).data) ** 2


def ensemble_psd(images) -> np.ndarray:
    """
    Средняя по ансамблю спектральная мощность |dft2(img)|² в каждом бине.

    Мощности считаются в пуле потоков; суммирование идет в порядке индексов.
    """
    images = list(images)
    if not images:
        raise OpticsError("ensemble_psd needs at least one image")
    shape = images[0].shape
    for img in images[1:]:
        require_same_shape(shape, img.shape)

    with ThreadPoolExecutor(max_workers=settings.FREQSYNTH_THREADS) as executor:
        powers = list(executor.map(_power, images))

    total = np.zeros(shape, dtype=np.float64)
    for power in powers:
        total += power
    return total / len(images)


def diagonal_cross_section(psd: np.ndarray) -> PsdProfile:
    """Значения вдоль главной диагонали от DC к углу, r = √2·|u|"""
    psd = np.asarray(psd, dtype=np.float64)
    n = require_square(psd.shape)
    c = n // 2
    length = n - c
    k = np.arange(length)
    return PsdProfile(
        frequencies=np.sqrt(2.0) * k / n,
        power=psd[c + k, c + k],
        kind=ProfileKind.DIAGONAL,
    )


def _radial_bins(n: int):
    grid = frequency_grid(n)
    radius = np.rint(grid.r * n).astype(np.int64)
    return radius


def radial_profile(psd: np.ndarray) -> PsdProfile:
    """Радиальное среднее PSD по кольцам целого радиуса (в бинах)"""
    psd = np.asarray(psd, dtype=np.float64)
    n = require_square(psd.shape)
    radius = _radial_bins(n).ravel()
    sums = np.bincount(radius, weights=psd.ravel())
    counts = np.bincount(radius)
    populated = counts > 0
    rings = np.arange(len(counts))[populated]
    return PsdProfile(
        frequencies=rings / n,
        power=sums[populated] / counts[populated],
        kind=ProfileKind.RADIAL,
    )


def radial_slope_fit(psd: np.ndarray, rmin: float = DEFAULT_FIT_RANGE[0],
                     rmax: float = DEFAULT_FIT_RANGE[1]) -> float:
    """
    Наклон log(power) от log(r) по радиально усредненным бинам в [rmin, rmax].

    Raises:
        OpticsError: некорректный диапазон или меньше 4 бинов в нем
    """
    if not 0 < rmin < rmax <= 0.5:
        raise OpticsError(f"fit range must satisfy 0 < rmin < rmax <= 0.5, got [{rmin}, {rmax}]")
    profile = radial_profile(psd)
    selected = (
        (profile.frequencies >= rmin)
        & (profile.frequencies <= rmax)
        & (profile.power > 0)
    )
    if np.count_nonzero(selected) < MIN_FIT_BINS:
        raise OpticsError(
            f"only {np.count_nonzero(selected)} radial bins in [{rmin}, {rmax}], "
            f"need at least {MIN_FIT_BINS}"
        )
    slope, _ = np.polyfit(
        np.log(profile.frequencies[selected]),
        np.log(profile.power[selected]),
        1,
    )
    return float(slope)


def profile_to_csv(profile: PsdProfile) -> str:
    buffer = io.StringIO()
    if profile.kind == ProfileKind.DIAGONAL:
        buffer.write("# main diagonal only: bins (c+k, c+k), r = sqrt(2)*k/n\n")
    else:
        buffer.write("# radial average over integer-radius rings\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["freq_cyc_per_px", "power"])
    for freq, power in zip(profile.frequencies, profile.power):
        writer.writerow([repr(float(freq)), repr(float(power))])
    return buffer.getvalue()


def write_profile_csv(profile: PsdProfile, path) -> Path:
    path = atomic_write_text(path, profile_to_csv(profile))
    logger.info(f"PSD profile ({profile.kind}, {len(profile.power)} bins) written to {path}")
    return path
