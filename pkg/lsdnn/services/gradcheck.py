# ===============================
# lsdnn/services/gradcheck.py
# ===============================
"""
Проверка аналитических градиентов центральными конечными разностями.
"""
import numpy as np

from lsdnn.services.autograd import Tensor

DEFAULT_STEP = 1e-5


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1e-12)
    return float(np.max(np.abs(analytic - numeric))) / scale


def numeric_gradient(fn, tensor: Tensor, step: float = DEFAULT_STEP) -> np.ndarray:
    """∂fn()/∂tensor по центральным разностям; fn возвращает скаляр"""
    tensor.data = np.ascontiguousarray(tensor.data)
    grad = np.zeros_like(tensor.data, dtype=np.float64)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + step
        plus = float(fn())
        flat[index] = original - step
        minus = float(fn())
        flat[index] = original
        out[index] = (plus - minus) / (2 * step)
    return grad


def check_gradients(build, inputs: list, seed: int = 0, step: float = DEFAULT_STEP) -> dict:
    """
    Сравнивает backward() с конечными разностями.

    Args:
        build: функция inputs -> Tensor (любой формы)
        inputs: список Tensor (float64, requires_grad=True)
        seed: зерно для случайного весового вектора проекции

    Returns:
        dict: имя (или индекс) входа -> относительная ошибка
    """
    sample_out = build(inputs)
    weights = np.random.default_rng(seed).standard_normal(sample_out.shape)

    def scalar():
        return float(np.sum(build(inputs).data * weights))

    for tensor in inputs:
        tensor.zero_grad()
    out = build(inputs)
    out.backward(weights)

    errors = {}
    for position, tensor in enumerate(inputs):
        if not tensor.requires_grad:
            continue
        numeric = numeric_gradient(scalar, tensor, step)
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(numeric)
        errors[tensor.name or position] = relative_error(analytic, numeric)
    return errors
