# ===============================
# lsdnn/services/metrics.py
# ===============================
"""
Потеря NPCC, метрики PSNR/SSIM и гистограммное согласование.
"""
import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from lsdnn.exceptions import DegenerateInputError
from optics.exceptions import ShapeMismatchError
from optics.services.raster import FloatRaster

logger = logging.getLogger('lsdnn')

SSIM_SIGMA = 1.5
# radius = int(3.5 * 1.5 + 0.5) = 5 -> окно 11×11
SSIM_TRUNCATE = 3.5
SSIM_RADIUS = 5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _array(value) -> np.ndarray:
    if isinstance(value, FloatRaster):
        return value.data
    return np.asarray(value, dtype=np.float64)


def _pair(fhat, f):
    a, b = _array(fhat), _array(f)
    if a.shape != b.shape:
        raise ShapeMismatchError(b.shape, a.shape, what="metric operands")
    return a, b


def _centered_rows(images: np.ndarray):
    centered = images - images.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(centered ** 2, axis=1))
    if np.any(norms == 0):
        raise DegenerateInputError("NPCC is undefined for zero-variance images")
    return centered, norms


def npcc_batch_values(fhat: np.ndarray, f: np.ndarray) -> np.ndarray:
    """E(f_k, f̂_k) для каждой строки (K, P)"""
    x, x_norm = _centered_rows(fhat)
    y, y_norm = _centered_rows(f)
    return -np.sum(x * y, axis=1) / (x_norm * y_norm)


def npcc_batch_gradient(fhat: np.ndarray, f: np.ndarray) -> np.ndarray:
    """
    ∂E/∂f̂ для каждой строки (K, P).

    dE/dx = -(y/(|x||y|) - (x·y) x/(|x|³|y|)), где x, y - центрированные
    изображения; центрирование уже учтено, т.к. результат имеет нулевое среднее.
    """
    x, x_norm = _centered_rows(fhat)
    y, y_norm = _centered_rows(f)
    dot = np.sum(x * y, axis=1, keepdims=True)
    xn = x_norm[:, None]
    yn = y_norm[:, None]
    return -(y / (xn * yn) - dot * x / (xn ** 3 * yn))


def npcc(fhat, f) -> float:
    """Отрицательный коэффициент корреляции Пирсона одного изображения"""
    a, b = _pair(fhat, f)
    return float(npcc_batch_values(a.reshape(1, -1), b.reshape(1, -1))[0])


def npcc_batch(fhat_stack, f_stack) -> float:
    """Пакетная потеря: сумма по k (без усреднения)"""
    a, b = _pair(fhat_stack, f_stack)
    return float(npcc_batch_values(a.reshape(a.shape[0], -1), b.reshape(b.shape[0], -1)).sum())


def npcc_gradient(fhat, f):
    a, b = _pair(fhat, f)
    grad = npcc_batch_gradient(a.reshape(1, -1), b.reshape(1, -1)).reshape(a.shape)
    if isinstance(fhat, FloatRaster):
        return fhat.with_data(grad)
    return grad


def histogram_match(fhat, reference):
    """
    Монотонное отображение яркостей f̂ на квантили reference.

    Ранги пикселей f̂ сохраняются (равные значения упорядочиваются по индексу),
    отсортированные значения выхода совпадают с отсортированными reference.
    Константный f̂ переходит в медиану reference.
    """
    a, ref = _pair(fhat, reference)
    flat = a.ravel()
    if np.ptp(flat) == 0:
        matched = np.full(a.shape, float(np.median(ref)))
    else:
        order = np.argsort(flat, kind="stable")
        matched_flat = np.empty_like(flat)
        matched_flat[order] = np.sort(ref.ravel(), kind="stable")
        matched = matched_flat.reshape(a.shape)
    if isinstance(fhat, FloatRaster):
        return fhat.with_data(matched)
    return matched


def _data_range(f: np.ndarray, data_range):
    if data_range is None:
        data_range = float(f.max() - f.min())
    if not data_range > 0:
        raise DegenerateInputError(f"data range must be positive, got {data_range}")
    return data_range


def psnr(fhat, f, data_range: float = None) -> float:
    """PSNR в дБ; для совпадающих изображений возвращает +inf"""
    a, b = _pair(fhat, f)
    data_range = _data_range(b, data_range)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(data_range ** 2 / mse)


def ssim(fhat, f, data_range: float = None) -> float:
    """
    SSIM с гауссовым окном 11×11 (σ=1.5), K1=0.01, K2=0.03.

    Локальные статистики без поправки на выборочную ковариацию; среднее
    берется по пикселям, для которых окно целиком лежит внутри изображения.
    """
    a, b = _pair(fhat, f)
    if min(a.shape) <= 2 * SSIM_RADIUS:
        raise ShapeMismatchError((2 * SSIM_RADIUS + 1,) * 2, a.shape, what="ssim minimum size")
    data_range = _data_range(b, data_range)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2

    def blur(img):
        return ndimage.gaussian_filter(img, sigma=SSIM_SIGMA, truncate=SSIM_TRUNCATE, mode="reflect")

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a ** 2
    var_b = blur(b * b) - mu_b ** 2
    cov = blur(a * b) - mu_a * mu_b
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    )
    r = SSIM_RADIUS
    return float(ssim_map[r:-r, r:-r].mean())


@dataclass(frozen=True)
class MetricRow:
    image_id: str
    npcc: float
    psnr_db: float
    ssim: float
    psnr_db_matched: float
    ssim_matched: float


@dataclass
class MetricReport:
    """Метрики по изображениям и их средние (строка MEAN)"""

    rows: list = field(default_factory=list)

    COLUMNS = ("image_id", "npcc", "psnr_db", "ssim", "psnr_db_matched", "ssim_matched")

    def add(self, image_id: str, fhat, f):
        """
        Считает метрики для пары до и после гистограммного согласования
        с эталоном f.
        """
        a, b = _pair(fhat, f)
        matched = histogram_match(a, b)
        row = MetricRow(
            image_id=image_id,
            npcc=npcc(a, b),
            psnr_db=psnr(a, b),
            ssim=ssim(a, b),
            psnr_db_matched=psnr(matched, b),
            ssim_matched=ssim(matched, b),
        )
        self.rows.append(row)
        return row

    def mean(self) -> dict:
        if not self.rows:
            return {}
        return {
            column: float(np.mean([getattr(row, column) for row in self.rows]))
            for column in self.COLUMNS[1:]
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.COLUMNS)
        for row in self.rows:
            writer.writerow([row.image_id] + [repr(float(getattr(row, c))) for c in self.COLUMNS[1:]])
        means = self.mean()
        writer.writerow(["MEAN"] + [repr(means[c]) for c in self.COLUMNS[1:]])
        return buffer.getvalue()
