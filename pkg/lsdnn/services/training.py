# ===============================
# lsdnn/services/training.py
# ===============================
"""
Обучение микро U-Net с потерей NPCC и оптимизатором Adam.
"""
import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from lsdnn.exceptions import TrainingDivergedError
from lsdnn.services.autograd import Tensor, add, npcc_loss
from lsdnn.services.metrics import npcc_batch_values
from lsdnn.services.optim import DEFAULT_LR, Adam
from lsdnn.services.unet import MicroUNet, MicroUNetConfig
from optics.exceptions import NonFiniteError, ShapeMismatchError

logger = logging.getLogger('lsdnn')


@dataclass(frozen=True)
class TrainingSettings:
    """Протокол обучения одной сети"""

    epochs: int = 20
    batch_size: int = 10
    lr: float = DEFAULT_LR
    seed: int = 0
    unet: MicroUNetConfig = field(default_factory=MicroUNetConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")


@dataclass
class TrainingHistory:
    """Кривые потерь: по шагам и по эпохам (средняя NPCC на изображение)"""

    label: str
    steps: list = field(default_factory=list)
    epochs: list = field(default_factory=list)

    def record_step(self, epoch: int, step: int, loss_per_image: float):
        self.steps.append((epoch, step, loss_per_image))

    def record_epoch(self, epoch: int, train_loss: float, val_npcc: float):
        self.epochs.append((epoch, train_loss, val_npcc))

    @property
    def final_val_npcc(self) -> float:
        return self.epochs[-1][2] if self.epochs else float("nan")

    def smoothed(self, window: int = 5) -> np.ndarray:
        """Скользящее среднее пошаговой потери"""
        losses = np.asarray([loss for _, _, loss in self.steps], dtype=np.float64)
        if len(losses) < window:
            return losses
        return np.convolve(losses, np.ones(window) / window, mode="valid")

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["epoch", "step", "loss_per_image", "val_npcc"])
        val_by_epoch = {epoch: val for epoch, _, val in self.epochs}
        last_step = {}
        for epoch, step, _ in self.steps:
            last_step[epoch] = step
        for epoch, step, loss in self.steps:
            val = val_by_epoch.get(epoch) if step == last_step[epoch] else None
            writer.writerow([epoch, step, repr(float(loss)), "" if val is None else repr(float(val))])
        return buffer.getvalue()


def _stack(images) -> np.ndarray:
    if isinstance(images, np.ndarray):
        return np.asarray(images, dtype=np.float64)
    return np.stack([getattr(img, "data", img) for img in images]).astype(np.float64)


class NetworkTrainer:
    """
    Обучает одну сеть на парах (вход, цель).

    Необязательное слагаемое offset прибавляется к выходу сети до потери
    (аддитивный обход синтезатора: f̂ = S(f̂_LF) + f̂_HF).
    """

    def __init__(self, settings: TrainingSettings, label: str):
        self.settings = settings
        self.label = label
        init_seq, shuffle_seq = np.random.SeedSequence(settings.seed).spawn(2)
        init_seed = int(init_seq.generate_state(1)[0])
        self.model = MicroUNet(settings.unet, seed=init_seed)
        self.shuffle_rng = np.random.default_rng(shuffle_seq)
        self.optimizer = Adam(self.model.params, lr=settings.lr)
        self.history = TrainingHistory(label)

    def _check(self, inputs, targets, offsets):
        n = self.settings.unet.n
        if inputs.shape != targets.shape:
            raise ShapeMismatchError(targets.shape, inputs.shape, what=f"{self.label} inputs vs targets")
        if inputs.ndim != 3 or inputs.shape[1:] != (n, n):
            raise ShapeMismatchError(("K", n, n), inputs.shape, what=f"{self.label} training stack")
        if offsets is not None and offsets.shape != inputs.shape:
            raise ShapeMismatchError(inputs.shape, offsets.shape, what=f"{self.label} output offsets")

    def predict(self, inputs, offsets=None) -> np.ndarray:
        inputs = _stack(inputs)
        out = self.model.predict(inputs, self.settings.batch_size)
        if offsets is not None:
            out = out + _stack(offsets)
        return out

    def evaluate(self, inputs, targets, offsets=None) -> float:
        """Средняя NPCC на изображение"""
        pred = self.predict(inputs, offsets)
        targets = _stack(targets)
        values = npcc_batch_values(pred.reshape(len(pred), -1), targets.reshape(len(targets), -1))
        return float(values.mean())

    def fit(self, inputs, targets, val_inputs=None, val_targets=None,
            offsets=None, val_offsets=None) -> TrainingHistory:
        inputs, targets = _stack(inputs), _stack(targets)
        offsets = None if offsets is None else _stack(offsets)
        self._check(inputs, targets, offsets)
        dtype = self.settings.unet.dtype
        count = len(inputs)
        batch_size = self.settings.batch_size
        step = 0
        logger.info(
            f"Training {self.label}: {count} pairs, {self.settings.epochs} epochs, "
            f"batch {batch_size}, {self.model.parameter_count} parameters"
        )
        for epoch in range(1, self.settings.epochs + 1):
            order = self.shuffle_rng.permutation(count)
            epoch_losses = []
            for start in range(0, count, batch_size):
                index = order[start:start + batch_size]
                step += 1
                try:
                    self.optimizer.zero_grad()
                    pred = self.model(Tensor(inputs[index][:, None].astype(dtype)))
                    if offsets is not None:
                        pred = add(pred, Tensor(offsets[index][:, None].astype(dtype)))
                    loss = npcc_loss(pred, targets[index][:, None])
                    loss.backward()
                    self.optimizer.step()
                except NonFiniteError as exc:
                    raise TrainingDivergedError(
                        f"{self.label}: {exc}", epoch=epoch, step=step
                    ) from exc
                except TrainingDivergedError as exc:
                    raise TrainingDivergedError(
                        f"{self.label}: non-finite gradient", epoch=epoch, step=step, layer=exc.layer
                    ) from exc
                per_image = loss.item() / len(index)
                self.history.record_step(epoch, step, per_image)
                epoch_losses.append(per_image * len(index))

            train_loss = float(np.sum(epoch_losses) / count)
            val_npcc = float("nan")
            if val_inputs is not None and len(val_inputs):
                val_npcc = self.evaluate(val_inputs, val_targets, val_offsets)
            self.history.record_epoch(epoch, train_loss, val_npcc)
            logger.info(
                f"{self.label} epoch {epoch}/{self.settings.epochs}: "
                f"train NPCC {train_loss:.4f}, validation NPCC {val_npcc:.4f}"
            )
        return self.history
