# ===============================
# lsdnn/services/optim.py
# ===============================
"""
Оптимизатор Adam с поправкой смещения моментов.
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from lsdnn.exceptions import TrainingDivergedError
from optics.exceptions import ShapeMismatchError

logger = logging.getLogger('lsdnn')

DEFAULT_LR = 1e-3
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


@dataclass
class AdamState:
    """Шаг и первые/вторые моменты по именам параметров"""

    step: int = 0
    m: dict = field(default_factory=OrderedDict)
    v: dict = field(default_factory=OrderedDict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float = DEFAULT_LR,
              beta1: float = DEFAULT_BETA1, beta2: float = DEFAULT_BETA2,
              eps: float = DEFAULT_EPS):
    """
    Один шаг Adam.

    Args:
        params: имя -> массив параметров
        grads: имя -> градиент (None трактуется как нулевой)
        state: моменты предыдущих шагов

    Returns:
        tuple: (новые параметры, новое состояние); входы не изменяются

    Raises:
        TrainingDivergedError: градиент содержит NaN/inf (в сообщении имя слоя)
    """
    step = state.step + 1
    new_params = OrderedDict()
    new_m = OrderedDict()
    new_v = OrderedDict()
    for name, value in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(value, dtype=np.float64)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != value.shape:
            raise ShapeMismatchError(value.shape, grad.shape, what=f"gradient of {name}")
        if not np.all(np.isfinite(grad)):
            raise TrainingDivergedError("non-finite gradient", step=step, layer=name)
        m = state.m.get(name, np.zeros(value.shape))
        v = state.v.get(name, np.zeros(value.shape))
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1 ** step)
        v_hat = v / (1.0 - beta2 ** step)
        update = lr * m_hat / (np.sqrt(v_hat) + eps)
        new_params[name] = (value - update).astype(value.dtype)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(step=step, m=new_m, v=new_v)


class Adam:
    """Обертка над adam_step для словаря Tensor-параметров модели (обновление на месте)"""

    def __init__(self, params: dict, lr: float = DEFAULT_LR, beta1: float = DEFAULT_BETA1,
                 beta2: float = DEFAULT_BETA2, eps: float = DEFAULT_EPS):
        if not lr > 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState()

    def step(self):
        values = OrderedDict((name, p.data) for name, p in self.params.items())
        grads = {name: p.grad for name, p in self.params.items()}
        updated, self.state = adam_step(
            values, grads, self.state, self.lr, self.beta1, self.beta2, self.eps
        )
        for name, value in updated.items():
            self.params[name].data = value

    def zero_grad(self):
        for param in self.params.values():
            param.zero_grad()
