# ===============================
# lsdnn/services/unet.py
# ===============================
"""
Микро Residual U-Net в уменьшенном масштабе.

Структура:
    DRB  - {conv stride 2 -> leaky-relu -> conv} + strided 1×1 conv skip
    URB  - зеркало DRB на транспонированных свертках, затем конкатенация
           с признаками энкодера того же масштаба
    head - conv до базовой ширины на полном разрешении
    RB   - два conv с остаточной связью
    out  - conv в 1 канал, инициализирован нулями; при global_residual
           выход = trunk(g) + g, т.е. в начале обучения сеть тождественна
"""
import logging
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from lsdnn.services.autograd import (
    Tensor,
    add,
    concat,
    conv2d,
    leaky_relu,
    transposed_conv2d,
)
from optics.exceptions import ShapeMismatchError

logger = logging.getLogger('lsdnn')


@dataclass(frozen=True)
class MicroUNetConfig:
    n: int = 64
    widths: tuple = (16, 32, 64)
    res_blocks: int = 2
    kernel_size: int = 3
    global_residual: bool = True
    leaky_slope: float = 0.1
    # 2 -> удвоенные ширины везде, кроме финальных residual-блоков
    width_multiplier: int = 1
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if not self.widths or any(w <= 0 for w in self.widths):
            raise ValueError(f"channel widths must be positive, got {self.widths}")
        if self.n % (2 ** self.depth) != 0:
            raise ValueError(
                f"grid size {self.n} is not divisible by 2^{self.depth} "
                f"(one halving per down block)"
            )
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel size must be odd and positive, got {self.kernel_size}")
        if self.res_blocks < 0:
            raise ValueError(f"residual block count must be >= 0, got {self.res_blocks}")
        if self.width_multiplier < 1:
            raise ValueError(f"width multiplier must be >= 1, got {self.width_multiplier}")

    @property
    def depth(self) -> int:
        return len(self.widths)

    @property
    def encoder_widths(self) -> tuple:
        return tuple(w * self.width_multiplier for w in self.widths)

    @property
    def base_width(self) -> int:
        return self.widths[0]


def _conv_shape(cin, cout, k):
    return (cout, cin, k, k)


def _convt_shape(cin, cout, k):
    return (cin, cout, k, k)


def layer_plan(config: MicroUNetConfig) -> list:
    """
    Список (имя слоя, вид, форма ядра, stride) в порядке инициализации.

    Вид: "conv" или "convt".
    """
    k = config.kernel_size
    widths = config.encoder_widths
    plan = []
    feature_channels = [1]
    cin = 1
    for d, cout in enumerate(widths):
        plan.append((f"drb{d}.conv1", "conv", _conv_shape(cin, cout, k), 2))
        plan.append((f"drb{d}.conv2", "conv", _conv_shape(cout, cout, k), 1))
        plan.append((f"drb{d}.skip", "conv", _conv_shape(cin, cout, 1), 2))
        feature_channels.append(cout)
        cin = cout
    for level in reversed(range(config.depth)):
        cout = widths[level - 1] if level >= 1 else widths[0]
        plan.append((f"urb{level}.up1", "convt", _convt_shape(cin, cout, k), 2))
        plan.append((f"urb{level}.conv2", "conv", _conv_shape(cout, cout, k), 1))
        plan.append((f"urb{level}.skip", "convt", _convt_shape(cin, cout, 1), 2))
        cin = cout + feature_channels[level]
    base = config.base_width
    plan.append(("head", "conv", _conv_shape(cin, base, k), 1))
    for r in range(config.res_blocks):
        plan.append((f"rb{r}.conv1", "conv", _conv_shape(base, base, k), 1))
        plan.append((f"rb{r}.conv2", "conv", _conv_shape(base, base, k), 1))
    plan.append(("out", "conv", _conv_shape(base, 1, k), 1))
    return plan


def count_parameters(config: MicroUNetConfig) -> int:
    total = 0
    for _, kind, shape, _ in layer_plan(config):
        bias = shape[0] if kind == "conv" else shape[1]
        total += int(np.prod(shape)) + bias
    return total


class MicroUNet:
    """Сеть с явным словарем параметров name -> Tensor"""

    def __init__(self, config: MicroUNetConfig, seed: int = 0, params: dict = None):
        self.config = config
        self.plan = layer_plan(config)
        self.strides = {name: stride for name, _, _, stride in self.plan}
        self.kinds = {name: kind for name, kind, _, _ in self.plan}
        if params is None:
            params = self._initialize(np.random.default_rng(seed))
        self.params = OrderedDict()
        for name, value in params.items():
            self.params[name] = Tensor(np.array(value, dtype=config.dtype), requires_grad=True, name=name)
        self._check_params()

    def _initialize(self, rng: np.random.Generator) -> OrderedDict:
        params = OrderedDict()
        for name, kind, shape, _ in self.plan:
            cout = shape[0] if kind == "conv" else shape[1]
            if name == "out":
                weight = np.zeros(shape)
            else:
                fan_in = (shape[1] if kind == "conv" else shape[0]) * shape[2] * shape[3]
                weight = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
            params[f"{name}.weight"] = weight
            params[f"{name}.bias"] = np.zeros(cout)
        return params

    def _check_params(self):
        for name, kind, shape, _ in self.plan:
            weight = self.params.get(f"{name}.weight")
            bias = self.params.get(f"{name}.bias")
            if weight is None or bias is None:
                raise KeyError(f"missing parameters for layer {name}")
            if weight.shape != shape:
                raise ShapeMismatchError(shape, weight.shape, what=f"{name}.weight")
        expected = {f"{name}.{part}" for name, *_ in self.plan for part in ("weight", "bias")}
        extra = set(self.params) - expected
        if extra:
            raise KeyError(f"unexpected parameters: {sorted(extra)}")

    @property
    def parameter_count(self) -> int:
        return sum(int(p.data.size) for p in self.params.values())

    def zero_grad(self):
        for param in self.params.values():
            param.zero_grad()

    def state_dict(self) -> OrderedDict:
        return OrderedDict((name, p.data.copy()) for name, p in self.params.items())

    def _layer(self, name: str, x: Tensor) -> Tensor:
        weight = self.params[f"{name}.weight"]
        bias = self.params[f"{name}.bias"]
        if self.kinds[name] == "conv":
            return conv2d(x, weight, bias, stride=self.strides[name])
        return transposed_conv2d(x, weight, bias, stride=self.strides[name])

    def forward(self, g: Tensor) -> Tensor:
        """g: (N, 1, n, n) -> (N, 1, n, n)"""
        n = self.config.n
        if g.data.ndim != 4 or g.shape[1:] != (1, n, n):
            raise ShapeMismatchError(("N", 1, n, n), g.shape, what="network input")
        slope = self.config.leaky_slope

        def act(t):
            return leaky_relu(t, slope)

        features = [g]
        x = g
        for d in range(self.config.depth):
            main = self._layer(f"drb{d}.conv2", act(self._layer(f"drb{d}.conv1", x)))
            x = act(add(main, self._layer(f"drb{d}.skip", x)))
            features.append(x)

        for level in reversed(range(self.config.depth)):
            main = self._layer(f"urb{level}.conv2", act(self._layer(f"urb{level}.up1", x)))
            x = act(add(main, self._layer(f"urb{level}.skip", x)))
            x = concat([x, features[level]], axis=1)

        x = act(self._layer("head", x))
        for r in range(self.config.res_blocks):
            branch = self._layer(f"rb{r}.conv2", act(self._layer(f"rb{r}.conv1", x)))
            x = act(add(x, branch))

        trunk = self._layer("out", x)
        if self.config.global_residual:
            return add(trunk, g)
        return trunk

    __call__ = forward

    def predict(self, inputs: np.ndarray, batch_size: int = 10) -> np.ndarray:
        """Прогон без построения графа: (K, n, n) -> (K, n, n)"""
        outputs = []
        frozen = OrderedDict((name, p.requires_grad) for name, p in self.params.items())
        for param in self.params.values():
            param.requires_grad = False
        try:
            for start in range(0, len(inputs), batch_size):
                batch = np.asarray(inputs[start:start + batch_size], dtype=self.config.dtype)[:, None]
                outputs.append(self.forward(Tensor(batch)).data[:, 0])
        finally:
            for name, flag in frozen.items():
                self.params[name].requires_grad = flag
        return np.concatenate(outputs, axis=0).astype(np.float64)
