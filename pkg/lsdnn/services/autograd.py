# ===============================
# lsdnn/services/autograd.py
# ===============================
"""
Минимальный движок обратного автоматического дифференцирования на numpy.

Тензоры в раскладке NCHW. Граф строится только если хотя бы один вход
требует градиента; backward() обходит граф в топологическом порядке
и затем разрывает его, так что граф пригоден для одного обратного прохода.
"""
import numpy as np

from lsdnn.services.metrics import npcc_batch_gradient, npcc_batch_values
from optics.exceptions import NonFiniteError, ShapeMismatchError


def _no_backward(grad):
    return None


class Tensor:
    """Массив значений с необязательным слотом градиента"""

    def __init__(self, data, requires_grad: bool = False, name: str = None):
        data = np.asarray(data)
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        self.data = data
        self.requires_grad = requires_grad
        self.name = name
        self.grad = None
        self._backward = _no_backward
        self._prev = ()
        self._op = ""

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{label})"

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad += grad

    def backward(self, grad=None):
        topo = []
        visited = set()

        def build_topo(node):
            if id(node) in visited:
                return
            visited.add(id(node))
            for child in node._prev:
                build_topo(child)
            topo.append(node)

        build_topo(self)
        if grad is None:
            grad = np.ones_like(self.data)
        self.grad = np.asarray(grad, dtype=self.data.dtype)
        for node in reversed(topo):
            if node.grad is not None:
                node._backward(node.grad)
        # граф одноразовый: промежуточные узлы освобождаются сразу
        for node in topo:
            node._backward = _no_backward
            node._prev = ()


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, parents, op: str) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced non-finite values")
    requires_grad = any(parent.requires_grad for parent in parents)
    out = Tensor(data, requires_grad=requires_grad)
    if requires_grad:
        out._prev = tuple(parents)
        out._op = op
    return out


def _check_conv_inputs(x: Tensor, w: Tensor, channel_axis: int, op: str):
    if x.data.ndim != 4:
        raise ShapeMismatchError(("N", "C", "H", "W"), x.shape, what=f"{op} input rank")
    if w.data.ndim != 4 or w.shape[2] != w.shape[3]:
        raise ShapeMismatchError(("O", "C", "k", "k"), w.shape, what=f"{op} kernel")
    if x.shape[1] != w.shape[channel_axis]:
        raise ShapeMismatchError(w.shape, x.shape, what=f"{op} channels (kernel vs input)")


def conv2d(x: Tensor, w: Tensor, b: Tensor = None, stride: int = 1) -> Tensor:
    """
    Свертка с нулевым дополнением "same" (pad = k // 2).

    x: (N, C, H, W), w: (O, C, k, k), b: (O,). Выход: (N, O, H', W'),
    H' = (H + 2p - k) // stride + 1.
    """
    _check_conv_inputs(x, w, 1, "conv2d")
    k = w.shape[2]
    pad = k // 2
    n, _, height, width = x.shape
    out_h = (height + 2 * pad - k) // stride + 1
    out_w = (width + 2 * pad - k) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))

    def patch(i, j):
        return xp[:, :, i:i + stride * (out_h - 1) + 1:stride, j:j + stride * (out_w - 1) + 1:stride]

    acc = np.zeros((n, out_h, out_w, w.shape[0]), dtype=x.data.dtype)
    for i in range(k):
        for j in range(k):
            acc += np.tensordot(patch(i, j), w.data[:, :, i, j], axes=([1], [1]))
    data = acc.transpose(0, 3, 1, 2)
    if b is not None:
        data = data + b.data[None, :, None, None]
    parents = (x, w) if b is None else (x, w, b)
    out = _result(np.ascontiguousarray(data), parents, "conv2d")

    def _backward(grad):
        dout = grad.transpose(0, 2, 3, 1)
        if w.requires_grad:
            dw = np.zeros_like(w.data)
            for i in range(k):
                for j in range(k):
                    dw[:, :, i, j] = np.tensordot(dout, patch(i, j), axes=([0, 1, 2], [0, 2, 3]))
            w.accumulate(dw)
        if x.requires_grad:
            dxp = np.zeros_like(xp)
            for i in range(k):
                for j in range(k):
                    contrib = np.tensordot(dout, w.data[:, :, i, j], axes=([3], [0]))
                    dxp[:, :, i:i + stride * (out_h - 1) + 1:stride,
                        j:j + stride * (out_w - 1) + 1:stride] += contrib.transpose(0, 3, 1, 2)
            x.accumulate(dxp[:, :, pad:pad + height, pad:pad + width])
        if b is not None and b.requires_grad:
            b.accumulate(grad.sum(axis=(0, 2, 3)))

    out._backward = _backward
    return out


def transposed_conv2d(x: Tensor, w: Tensor, b: Tensor = None, stride: int = 2) -> Tensor:
    """
    Транспонированная свертка, сопряженная к conv2d с тем же stride и pad = k // 2.

    x: (N, Cin, H, W), w: (Cin, Cout, k, k). Выход: (N, Cout, stride·H, stride·W).
    """
    _check_conv_inputs(x, w, 0, "transposed_conv2d")
    k = w.shape[2]
    pad = k // 2
    n, _, height, width = x.shape
    out_h, out_w = stride * height, stride * width
    full_h = max(stride * (height - 1) + k, pad + out_h)
    full_w = max(stride * (width - 1) + k, pad + out_w)
    cout = w.shape[1]

    def window(i, j):
        return (slice(None), slice(i, i + stride * (height - 1) + 1, stride),
                slice(j, j + stride * (width - 1) + 1, stride), slice(None))

    full = np.zeros((n, full_h, full_w, cout), dtype=x.data.dtype)
    for i in range(k):
        for j in range(k):
            full[window(i, j)] += np.tensordot(x.data, w.data[:, :, i, j], axes=([1], [0]))
    data = full[:, pad:pad + out_h, pad:pad + out_w, :].transpose(0, 3, 1, 2)
    if b is not None:
        data = data + b.data[None, :, None, None]
    parents = (x, w) if b is None else (x, w, b)
    out = _result(np.ascontiguousarray(data), parents, "transposed_conv2d")

    def _backward(grad):
        dfull = np.zeros_like(full)
        dfull[:, pad:pad + out_h, pad:pad + out_w, :] = grad.transpose(0, 2, 3, 1)
        if x.requires_grad:
            dx = np.zeros((n, height, width, x.shape[1]), dtype=x.data.dtype)
            for i in range(k):
                for j in range(k):
                    dx += np.tensordot(dfull[window(i, j)], w.data[:, :, i, j], axes=([3], [1]))
            x.accumulate(dx.transpose(0, 3, 1, 2))
        if w.requires_grad:
            dw = np.zeros_like(w.data)
            for i in range(k):
                for j in range(k):
                    dw[:, :, i, j] = np.tensordot(x.data, dfull[window(i, j)], axes=([0, 2, 3], [0, 1, 2]))
            w.accumulate(dw)
        if b is not None and b.requires_grad:
            b.accumulate(grad.sum(axis=(0, 2, 3)))

    out._backward = _backward
    return out


def leaky_relu(x: Tensor, slope: float = 0.1) -> Tensor:
    positive = x.data > 0
    out = _result(np.where(positive, x.data, slope * x.data), (x,), "leaky_relu")

    def _backward(grad):
        if x.requires_grad:
            x.accumulate(np.where(positive, grad, slope * grad))

    out._backward = _backward
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(a.shape, b.shape, what="add operands")
    out = _result(a.data + b.data, (a, b), "add")

    def _backward(grad):
        if a.requires_grad:
            a.accumulate(grad)
        if b.requires_grad:
            b.accumulate(grad)

    out._backward = _backward
    return out


def concat(tensors, axis: int = 1) -> Tensor:
    """Конкатенация по оси каналов; остальные оси должны совпадать"""
    tensors = [as_tensor(t) for t in tensors]
    reference = tensors[0].shape
    for t in tensors[1:]:
        if len(t.shape) != len(reference) or any(
            size != ref for dim, (size, ref) in enumerate(zip(t.shape, reference)) if dim != axis
        ):
            raise ShapeMismatchError(reference, t.shape, what=f"concat operands (axis {axis})")
    out = _result(np.concatenate([t.data for t in tensors], axis=axis), tensors, "concat")
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def _backward(grad):
        for t, start, stop in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                index = [slice(None)] * grad.ndim
                index[axis] = slice(start, stop)
                t.accumulate(grad[tuple(index)])

    out._backward = _backward
    return out


def npcc_loss(pred: Tensor, target) -> Tensor:
    """
    Пакетная потеря NPCC: сумма по k значений E(f_k, f̂_k).

    pred: (N, 1, H, W) или (N, H, W); target - массив той же формы.
    """
    target = np.asarray(target)
    if target.shape != pred.shape:
        raise ShapeMismatchError(pred.shape, target.shape, what="npcc target")
    images = pred.data.reshape(pred.shape[0], -1)
    refs = target.reshape(target.shape[0], -1).astype(np.float64)
    values = npcc_batch_values(images.astype(np.float64), refs)
    out = _result(np.asarray(values.sum(), dtype=pred.data.dtype), (pred,), "npcc_loss")

    def _backward(grad):
        if pred.requires_grad:
            dpred = npcc_batch_gradient(images.astype(np.float64), refs) * float(grad)
            pred.accumulate(dpred.reshape(pred.shape).astype(pred.data.dtype))

    out._backward = _backward
    return out
