# ===============================
# lsdnn/services/wiener.py
# ===============================
"""
Линейный обучаемый реконструктор: независимый комплексный коэффициент
на каждую частоту, решение задачи наименьших квадратов с ridge-членом.
"""
import logging
from dataclasses import dataclass

import numpy as np

from lsdnn.exceptions import LsdnnError
from optics.exceptions import NonFiniteError, OpticsError
from optics.services.raster import FloatRaster, dft2, require_same_shape

logger = logging.getLogger('lsdnn')

DEFAULT_RIDGE = 1e-6


@dataclass(frozen=True)
class WienerLearner:
    gains: np.ndarray
    eps: float = DEFAULT_RIDGE

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=np.complex128)
        if not np.all(np.isfinite(gains)):
            raise NonFiniteError("Wiener gains must be finite")
        if not self.eps > 0:
            raise OpticsError(f"ridge eps must be positive, got {self.eps}")
        object.__setattr__(self, "gains", gains)

    @property
    def shape(self) -> tuple:
        return self.gains.shape

    def apply(self, g: FloatRaster) -> FloatRaster:
        return wiener_apply(self, g)


def wiener_fit(pairs, eps: float = DEFAULT_RIDGE) -> WienerLearner:
    """
    w(u, v) = Σ conj(G_k)·F_k / (Σ |G_k|² + eps)

    Args:
        pairs: последовательность (измерение g, цель f) из FloatRaster
        eps: ridge-член
    """
    pairs = list(pairs)
    if not pairs:
        raise LsdnnError("Wiener fit needs at least one (measurement, target) pair")
    if len(pairs) == 1:
        # одна пара дает точное обращение на ее же спектре: усиление не регуляризовано ансамблем
        logger.warning("Wiener fit on a single pair: gains overfit that pair, use the training split")
    shape = pairs[0][0].shape
    numerator = np.zeros(shape, dtype=np.complex128)
    denominator = np.zeros(shape, dtype=np.float64)
    for g, f in pairs:
        require_same_shape(shape, g.shape)
        require_same_shape(shape, f.shape)
        G = dft2(g).data
        F = dft2(f).data
        numerator += np.conj(G) * F
        denominator += np.abs(G) ** 2
    learner = WienerLearner(numerator / (denominator + eps), eps)
    logger.info(f"Wiener learner fitted on {len(pairs)} pairs (eps={eps:g})")
    return learner


def wiener_apply(learner: WienerLearner, g: FloatRaster) -> FloatRaster:
    """Вещественная часть idft2(w·dft2(g))"""
    require_same_shape(learner.shape, g.shape)
    spectrum = dft2(g)
    product = spectrum.with_data(learner.gains * spectrum.data)
    data = np.fft.ifft2(np.fft.ifftshift(product.data), norm="ortho").real
    return FloatRaster(data, g.pitch)
