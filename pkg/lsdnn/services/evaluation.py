# ===============================
# lsdnn/services/evaluation.py
# ===============================
"""
Оценка реконструкций: тест разрешения точек, сравнение диагональных
PSD по частотным третям, таблица метрик.
"""
import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lsdnn.services.metrics import MetricReport
from optics.exceptions import OpticsError, ShapeMismatchError
from optics.services.raster import FloatRaster, require_same_shape
from optics.services.spectral import PsdProfile, diagonal_cross_section, ensemble_psd
from optics.utils.files import atomic_write_text

logger = logging.getLogger('lsdnn')

RESOLVED_THRESHOLD = 0.8
PEAK_SEARCH_RADIUS = 2
BAND_NAMES = ("low", "mid", "top")
# Порядок колонок psd_compare.csv
PSD_COLUMNS = ("gt", "meas", "lf", "hf", "shat", "wiener")


@dataclass(frozen=True)
class DotPattern:
    """Ряд одиночных точек амплитуды 1 на нулевом фоне"""

    n: int
    spacing: int
    count: int
    row: int
    columns: tuple

    def raster(self, pitch: float = 1.0) -> FloatRaster:
        data = np.zeros((self.n, self.n))
        data[self.row, list(self.columns)] = 1.0
        return FloatRaster(data, pitch)

    def midpoints(self) -> list:
        return [(a + b) / 2 for a, b in zip(self.columns[:-1], self.columns[1:])]


def make_dot_pattern(n: int, spacing: int = 5, count: int = 2) -> DotPattern:
    """
    Точки в строке n//2 с шагом spacing, ряд отцентрирован,
    с каждой стороны остается поле не меньше spacing.
    """
    if spacing < 2:
        raise OpticsError(f"dot spacing must be >= 2, got {spacing}")
    if count < 2:
        raise OpticsError(f"need at least 2 dots, got {count}")
    span = (count - 1) * spacing
    start = (n - span) // 2
    if start < spacing or start + span > n - 1 - spacing:
        raise OpticsError(
            f"{count} dots with spacing {spacing} do not fit a {n}x{n} grid with margins"
        )
    columns = tuple(start + k * spacing for k in range(count))
    return DotPattern(n=n, spacing=spacing, count=count, row=n // 2, columns=columns)


@dataclass(frozen=True)
class ResolveResult:
    resolved: bool
    dip_ratio: float
    profile: np.ndarray
    peaks: tuple = ()
    diagnostic: str = ""


def _value_at(profile: np.ndarray, position: float) -> float:
    low = int(math.floor(position))
    high = int(math.ceil(position))
    return float((profile[low] + profile[high]) / 2)


def resolve_test(recon: FloatRaster, pattern: DotPattern) -> ResolveResult:
    """
    Разрешены ли соседние точки в реконструкции.

    dip_ratio = значение в середине между точками / меньший из двух пиков
    (максимум по соседним парам); разрешено при dip_ratio <= 0.8.
    Пик ищется в окне ±2 пикселя вокруг каждой точки.
    """
    if recon.shape != (pattern.n, pattern.n):
        raise ShapeMismatchError((pattern.n, pattern.n), recon.shape, what="resolution test grid")
    profile = np.array(recon.data[pattern.row, :], dtype=np.float64)
    peaks = []
    for column in pattern.columns:
        lo = max(0, column - PEAK_SEARCH_RADIUS)
        hi = min(pattern.n, column + PEAK_SEARCH_RADIUS + 1)
        window = profile[lo:hi]
        peak = float(window.max())
        if np.ptp(window) == 0 or not peak > 0:
            return ResolveResult(
                resolved=False,
                dip_ratio=float("nan"),
                profile=profile,
                diagnostic=f"no peak found within ±{PEAK_SEARCH_RADIUS} px of column {column}",
            )
        peaks.append(peak)

    ratios = []
    for (left, right), mid in zip(zip(peaks[:-1], peaks[1:]), pattern.midpoints()):
        ratios.append(_value_at(profile, mid) / min(left, right))
    dip_ratio = float(max(ratios))
    return ResolveResult(
        resolved=dip_ratio <= RESOLVED_THRESHOLD,
        dip_ratio=dip_ratio,
        profile=profile,
        peaks=tuple(peaks),
    )


def npcc_ceiling(psd: np.ndarray, transfer: np.ndarray) -> float:
    """
    Нижняя граница NPCC для любой оценки, не знающей содержимого вне полосы.

    Если фазы вне полосы пропускания (transfer == 0) не зависят от измерения,
    лучшая оценка - проекция объекта на полосу, и ее NPCC равен
    -sqrt(мощность в полосе / полная мощность). Бин DC не учитывается:
    NPCC инвариантен к сдвигу.

    Args:
        psd: центрированная ансамблевая PSD объектов
        transfer: центрированная передаточная функция на той же сетке
    """
    power = np.array(psd, dtype=np.float64)
    require_same_shape(power.shape, np.shape(transfer))
    power[power.shape[0] // 2, power.shape[1] // 2] = 0.0
    total = float(power.sum())
    if not total > 0:
        raise OpticsError("PSD has no power outside the DC bin")
    return -math.sqrt(float(power[np.asarray(transfer) > 0].sum()) / total)


def band_edges(max_frequency: float = 0.5 * math.sqrt(2.0)) -> np.ndarray:
    return np.linspace(0.0, max_frequency, len(BAND_NAMES) + 1)


def band_masks(frequencies: np.ndarray) -> dict:
    """Трети диагонального диапазона; DC не входит ни в одну"""
    edges = band_edges()
    masks = {}
    for index, name in enumerate(BAND_NAMES):
        lower, upper = edges[index], edges[index + 1]
        mask = (frequencies >= lower) & (frequencies < upper) & (frequencies > 0)
        if index == len(BAND_NAMES) - 1:
            mask |= frequencies >= upper
        masks[name] = mask
    return masks


def log_distance(power: np.ndarray, reference: np.ndarray) -> float:
    tiny = np.finfo(np.float64).tiny
    return float(np.mean(np.abs(np.log10(np.maximum(power, tiny)) - np.log10(np.maximum(reference, tiny)))))


@dataclass
class PsdComparison:
    frequencies: np.ndarray
    profiles: dict = field(default_factory=dict)
    distances: dict = field(default_factory=dict)

    def top_distance(self, label: str) -> float:
        return self.distances[label]["top"]

    def profiles_csv(self) -> str:
        buffer = io.StringIO()
        buffer.write("# main diagonal only: bins (c+k, c+k), r = sqrt(2)*k/n\n")
        writer = csv.writer(buffer, lineterminator="\n")
        labels = list(self.profiles)
        writer.writerow(["freq"] + labels)
        for k, freq in enumerate(self.frequencies):
            writer.writerow([repr(float(freq))] + [repr(float(self.profiles[label][k])) for label in labels])
        return buffer.getvalue()

    def bands_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["ensemble"] + list(BAND_NAMES))
        for label, bands in self.distances.items():
            writer.writerow([label] + [repr(float(bands[name])) for name in BAND_NAMES])
        return buffer.getvalue()


def compare_psd(ensembles: dict) -> PsdComparison:
    """
    Диагональные PSD всех ансамблей и расстояния до эталона "gt"
    по частотным третям: mean |log10 PSD_x - log10 PSD_gt|.
    """
    if "gt" not in ensembles:
        raise OpticsError("PSD comparison needs a ground-truth ensemble 'gt'")
    sizes = {label: len(images) for label, images in ensembles.items()}
    if len(set(sizes.values())) != 1:
        raise OpticsError(f"ensembles differ in size: {sizes}")
    shape = ensembles["gt"][0].shape
    for label, images in ensembles.items():
        for img in images:
            if img.shape != shape:
                raise ShapeMismatchError(shape, img.shape, what=f"ensemble {label}")

    ordered = [label for label in PSD_COLUMNS if label in ensembles]
    ordered += [label for label in ensembles if label not in ordered]
    profiles = {}
    frequencies = None
    for label in ordered:
        profile: PsdProfile = diagonal_cross_section(ensemble_psd(ensembles[label]))
        profiles[label] = profile.power
        frequencies = profile.frequencies

    masks = band_masks(frequencies)
    gt = profiles["gt"]
    distances = {
        label: {name: log_distance(power[mask], gt[mask]) for name, mask in masks.items()}
        for label, power in profiles.items()
    }
    logger.info(
        "Top-third PSD distances: "
        + ", ".join(f"{label}={bands['top']:.3f}" for label, bands in distances.items())
    )
    return PsdComparison(frequencies=frequencies, profiles=profiles, distances=distances)


def write_psd_comparison(comparison: PsdComparison, out_dir) -> tuple:
    out_dir = Path(out_dir)
    compare_path = atomic_write_text(out_dir / "psd_compare.csv", comparison.profiles_csv())
    bands_path = atomic_write_text(out_dir / "psd_bands.csv", comparison.bands_csv())
    return compare_path, bands_path


def restest_csv(pattern: DotPattern, results: dict, b: float = None) -> str:
    """Параметры шаблона и dip_ratio/флаг для каждой стадии"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["stage", "n", "spacing", "count", "row", "columns", "b",
                     "dip_ratio", "resolved", "diagnostic"])
    for stage, result in results.items():
        writer.writerow([
            stage, pattern.n, pattern.spacing, pattern.count, pattern.row,
            " ".join(str(c) for c in pattern.columns),
            "" if b is None else repr(float(b)),
            repr(float(result.dip_ratio)) if math.isfinite(result.dip_ratio) else "n/a",
            int(result.resolved), result.diagnostic,
        ])
    return buffer.getvalue()


def write_metric_report(report: MetricReport, path) -> Path:
    path = atomic_write_text(path, report.to_csv())
    means = report.mean()
    logger.info(
        f"Metrics for {len(report.rows)} images written to {path}: "
        f"mean NPCC {means.get('npcc', float('nan')):.4f}, "
        f"PSNR {means.get('psnr_db', float('nan')):.2f} dB"
    )
    return path
