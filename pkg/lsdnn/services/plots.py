# ===============================
# lsdnn/services/plots.py
# ===============================
"""
PNG-отчеты (matplotlib, бэкенд Agg).
"""
import io
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from optics.services.raster import FloatRaster, dft2  # noqa: E402
from optics.utils.files import atomic_write_bytes  # noqa: E402

logger = logging.getLogger('lsdnn')

DPI = 120

LABELS = {
    "gt": "ground truth",
    "meas": "measurement",
    "lf": "DNN-L",
    "hf": "DNN-H",
    "shat": "LS-DNN",
    "wiener": "Wiener",
}


def _save(fig, path) -> Path:
    buffer = io.BytesIO()
    # фиксированные метаданные, чтобы PNG был побайтно воспроизводим
    fig.savefig(buffer, format="png", dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    path = atomic_write_bytes(path, buffer.getvalue())
    logger.info(f"Plot written to {path}")
    return path


def plot_psd_comparison(comparison, path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    freqs = comparison.frequencies
    tiny = np.finfo(np.float64).tiny
    for label, power in comparison.profiles.items():
        # DC не показываем на логарифмической оси
        ax.semilogy(freqs[1:], np.maximum(power[1:], tiny), label=LABELS.get(label, label))
    ax.set_xlabel("diagonal frequency r (cycles/pixel)")
    ax.set_ylabel("PSD")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_restest(pattern, results: dict, path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    lo = max(0, min(pattern.columns) - 3 * pattern.spacing)
    hi = min(pattern.n, max(pattern.columns) + 3 * pattern.spacing + 1)
    x = np.arange(lo, hi)
    for stage, result in results.items():
        profile = result.profile[lo:hi]
        peak = float(np.max(np.abs(profile))) or 1.0
        dip = f"{result.dip_ratio:.2f}" if np.isfinite(result.dip_ratio) else "n/a"
        ax.plot(x, profile / peak, marker=".", label=f"{stage} (dip {dip})")
    for column in pattern.columns:
        ax.axvline(column, color="grey", linestyle=":", linewidth=0.8)
    ax.set_xlabel("column (pixels)")
    ax.set_ylabel("normalized intensity")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def spectrum_preview(f: FloatRaster, g: FloatRaster, path, titles=("object", "measurement")) -> Path:
    """Логарифм модуля спектров объекта и измерения рядом"""
    fig, axes = plt.subplots(1, 2, figsize=(8, 4))
    n = f.n
    extent = (-0.5, 0.5 - 1.0 / n, 0.5 - 1.0 / n, -0.5)
    for ax, img, title in zip(axes, (f, g), titles):
        magnitude = np.abs(dft2(img).data)
        ax.imshow(np.log10(magnitude + 1e-12), cmap="gray", extent=extent)
        ax.set_title(f"{title}: log10 |spectrum|")
        ax.set_xlabel("u (cycles/pixel)")
        ax.set_ylabel("v (cycles/pixel)")
    fig.tight_layout()
    return _save(fig, path)


def plot_loss_curves(histories: dict, path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, history in histories.items():
        steps = [step for _, step, _ in history.steps]
        losses = [loss for _, _, loss in history.steps]
        ax.plot(steps, losses, label=label)
    ax.set_xlabel("step")
    ax.set_ylabel("NPCC per image")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)
