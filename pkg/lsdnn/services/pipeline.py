# ===============================
# lsdnn/services/pipeline.py
# ===============================
"""
Трехстадийный конвейер LS-DNN.

Стадия 1: DNN-L учится на (g -> f), DNN-H на (g -> premodulate(f, p));
сети независимы и обучаются параллельно.
Стадия 2: DNN-S получает f̂_LF, к ее выходу прибавляется f̂_HF,
цель - немодулированный f.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from lsdnn.exceptions import CheckpointError, PipelineStateError
from lsdnn.services.checkpoints import load_weights, save_weights
from lsdnn.services.training import NetworkTrainer, TrainingHistory, TrainingSettings
from lsdnn.services.unet import MicroUNet, MicroUNetConfig, count_parameters
from lsdnn.services.wiener import DEFAULT_RIDGE, WienerLearner, wiener_apply, wiener_fit
from optics.exceptions import ShapeMismatchError
from optics.services.forward import ForwardConfig
from optics.services.raster import FloatRaster
from optics.services.spectral import premodulate
from optics.utils.files import atomic_write_text, format_key_value, read_key_value

logger = logging.getLogger('lsdnn')

MANIFEST_NAME = "manifest.txt"
STAGE1 = ("L", "H")
STAGE2 = ("S",)
VALIDATION_FRACTION = 0.1


@dataclass(frozen=True)
class BandOutputs:
    """Выходы стадии 1: f̂_LF (DNN-L) и f̂_HF (DNN-H)"""

    f_lf: FloatRaster
    f_hf: FloatRaster

    def __post_init__(self):
        if self.f_lf.shape != self.f_hf.shape:
            raise ShapeMismatchError(self.f_lf.shape, self.f_hf.shape, what="band outputs")


@dataclass(frozen=True)
class Reconstruction:
    f_lf: FloatRaster
    f_hf: FloatRaster
    f_hat: FloatRaster
    wiener: FloatRaster = None

    @property
    def bands(self) -> BandOutputs:
        return BandOutputs(self.f_lf, self.f_hf)


def split_indices(count: int, seed: int, fraction: float = VALIDATION_FRACTION):
    """
    Разбиение 9:1 на обучение и валидацию, стабильное для зерна.

    Returns:
        tuple: (train, validation) - отсортированные списки индексов
    """
    if count < 2:
        raise ValueError(f"need at least 2 samples to split, got {count}")
    val_count = min(count - 1, max(1, int(round(count * fraction))))
    order = np.random.default_rng(seed).permutation(count)
    val = sorted(int(i) for i in order[:val_count])
    train = sorted(int(i) for i in order[val_count:])
    return train, val


def _join(values) -> str:
    return ",".join(str(int(v)) for v in values)


def _split(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


@dataclass
class PipelineCheckpoint:
    """
    Каталог чекпоинта: L.lswt, H.lswt, S.lswt, W.lswt и manifest.txt.
    """

    forward: ForwardConfig
    p: float
    training: TrainingSettings
    train_indices: list
    val_indices: list
    networks: dict = field(default_factory=dict)
    wiener: WienerLearner = None
    epochs_done: dict = field(default_factory=dict)

    @property
    def unet(self) -> MicroUNetConfig:
        return self.training.unet

    def require(self, *labels):
        missing = [label for label in labels if label not in self.networks]
        if missing:
            raise PipelineStateError(f"checkpoint is missing networks: {', '.join(missing)}")

    def manifest(self) -> dict:
        fwd = self.forward
        unet = self.unet
        pairs = {
            "kind": fwd.kind,
            "n": fwd.n,
            "b": repr(float(fwd.b)),
            "wavelength": repr(float(fwd.wavelength)),
            "z": repr(float(fwd.z)),
            "pitch": repr(float(fwd.pitch)),
            "resample": fwd.resample,
            "p": repr(float(self.p)),
            "seed": self.training.seed,
            "epochs": self.training.epochs,
            "batch_size": self.training.batch_size,
            "lr": repr(float(self.training.lr)),
            "widths": _join(unet.widths),
            "res_blocks": unet.res_blocks,
            "kernel_size": unet.kernel_size,
            "global_residual": int(unet.global_residual),
            "leaky_slope": repr(float(unet.leaky_slope)),
            "width_multiplier": unet.width_multiplier,
            "params": count_parameters(unet),
            "networks": ",".join(label for label in ("L", "H", "S") if label in self.networks),
        }
        for label in ("L", "H", "S"):
            if label in self.epochs_done:
                pairs[f"epochs_{label}"] = self.epochs_done[label]
        if self.wiener is not None:
            pairs["wiener_eps"] = repr(float(self.wiener.eps))
        pairs["train_indices"] = _join(self.train_indices)
        pairs["val_indices"] = _join(self.val_indices)
        return pairs

    def save(self, root, labels=None) -> Path:
        """
        Пишет сети из labels и манифест. По умолчанию - все сети
        и линейный реконструктор (метка "W").
        """
        root = Path(root)
        if labels is None:
            labels = list(self.networks) + (["W"] if self.wiener is not None else [])
        for label in labels:
            if label == "W":
                save_weights(
                    {"gains.real": self.wiener.gains.real, "gains.imag": self.wiener.gains.imag},
                    root / "W.lswt",
                )
            else:
                save_weights(self.networks[label].state_dict(), root / f"{label}.lswt")
        atomic_write_text(
            root / MANIFEST_NAME,
            format_key_value(self.manifest(), header="LS-DNN pipeline checkpoint"),
        )
        logger.info(f"Checkpoint ({', '.join(labels)}) saved to {root}")
        return root

    @classmethod
    def load(cls, root) -> "PipelineCheckpoint":
        root = Path(root)
        manifest_path = root / MANIFEST_NAME
        if not manifest_path.exists():
            raise PipelineStateError(f"checkpoint manifest not found: {manifest_path}")
        try:
            m = read_key_value(manifest_path)
            forward = ForwardConfig(
                kind=m["kind"], n=int(m["n"]), b=float(m["b"]),
                wavelength=float(m["wavelength"]), z=float(m["z"]),
                pitch=float(m["pitch"]), resample=m["resample"],
            )
            unet = MicroUNetConfig(
                n=int(m["n"]), widths=tuple(_split(m["widths"])),
                res_blocks=int(m["res_blocks"]), kernel_size=int(m["kernel_size"]),
                global_residual=bool(int(m["global_residual"])),
                leaky_slope=float(m["leaky_slope"]),
                width_multiplier=int(m["width_multiplier"]),
            )
            training = TrainingSettings(
                epochs=int(m["epochs"]), batch_size=int(m["batch_size"]),
                lr=float(m["lr"]), seed=int(m["seed"]), unet=unet,
            )
            labels = [label for label in m.get("networks", "").split(",") if label]
            checkpoint = cls(
                forward=forward,
                p=float(m["p"]),
                training=training,
                train_indices=_split(m["train_indices"]),
                val_indices=_split(m["val_indices"]),
                epochs_done={
                    label: int(m[f"epochs_{label}"]) for label in labels if f"epochs_{label}" in m
                },
            )
            eps = m.get("wiener_eps")
        except (KeyError, ValueError) as exc:
            raise CheckpointError(f"{manifest_path}: invalid manifest ({exc})") from exc

        if int(m["params"]) != count_parameters(unet):
            raise CheckpointError(
                f"{manifest_path}: parameter count {m['params']} does not match "
                f"architecture ({count_parameters(unet)})"
            )
        for label in labels:
            weights = load_weights(root / f"{label}.lswt")
            try:
                checkpoint.networks[label] = MicroUNet(unet, params=weights)
            except (KeyError, ValueError) as exc:
                raise CheckpointError(f"{root / label}.lswt does not fit the architecture: {exc}") from exc
        if eps is not None:
            gains = load_weights(root / "W.lswt")
            if set(gains) != {"gains.real", "gains.imag"}:
                raise CheckpointError(f"{root / 'W.lswt'}: unexpected tensors {sorted(gains)}")
            checkpoint.wiener = WienerLearner(
                gains["gains.real"].astype(np.float64) + 1j * gains["gains.imag"].astype(np.float64),
                float(eps),
            )
        logger.info(f"Checkpoint loaded from {root}: networks {labels}")
        return checkpoint


def _data(images) -> np.ndarray:
    return np.stack([img.data for img in images]).astype(np.float64)


class LsdnnPipeline:
    """Обучение и инференс трех сетей"""

    @staticmethod
    def premodulated_targets(objects, p: float) -> list:
        return [premodulate(f, p) for f in objects]

    @classmethod
    def train_stage1(cls, measurements, objects, forward: ForwardConfig, p: float,
                     training: TrainingSettings, split=None, parallel: bool = True,
                     wiener_eps: float = DEFAULT_RIDGE):
        """
        Обучает DNN-L и DNN-H (одинаковое зерно, одинаковый порядок батчей).

        Returns:
            tuple: (PipelineCheckpoint, {"L": TrainingHistory, "H": TrainingHistory})
        """
        if p < 0:
            raise ValueError(f"premodulation exponent must be >= 0, got {p}")
        if len(measurements) != len(objects):
            raise ShapeMismatchError((len(objects),), (len(measurements),), what="dataset size")
        train_idx, val_idx = split or split_indices(len(objects), training.seed)
        g = _data(measurements)
        f = _data(objects)
        f_mod = _data(cls.premodulated_targets(objects, p))
        jobs = {
            "L": (g[train_idx], f[train_idx], g[val_idx], f[val_idx]),
            "H": (g[train_idx], f_mod[train_idx], g[val_idx], f_mod[val_idx]),
        }

        def run(label):
            trainer = NetworkTrainer(training, label=f"DNN-{label}")
            trainer.fit(*jobs[label])
            return trainer

        if parallel:
            with ThreadPoolExecutor(max_workers=2) as executor:
                trainers = dict(zip(STAGE1, executor.map(run, STAGE1)))
        else:
            trainers = {label: run(label) for label in STAGE1}

        checkpoint = PipelineCheckpoint(
            forward=forward, p=p, training=training,
            train_indices=list(train_idx), val_indices=list(val_idx),
        )
        for label, trainer in trainers.items():
            checkpoint.networks[label] = trainer.model
            checkpoint.epochs_done[label] = training.epochs
        checkpoint.wiener = wiener_fit(
            [(measurements[i], objects[i]) for i in train_idx], eps=wiener_eps
        )
        histories = {label: trainer.history for label, trainer in trainers.items()}
        return checkpoint, histories

    @staticmethod
    def band_outputs(checkpoint: PipelineCheckpoint, g_stack: np.ndarray):
        checkpoint.require(*STAGE1)
        batch = checkpoint.training.batch_size
        f_lf = checkpoint.networks["L"].predict(g_stack, batch)
        f_hf = checkpoint.networks["H"].predict(g_stack, batch)
        return f_lf, f_hf

    @classmethod
    def train_stage2(cls, checkpoint: PipelineCheckpoint, measurements, objects,
                     training: TrainingSettings = None) -> TrainingHistory:
        """
        Обучает DNN-S на обучающей части того же разбиения. Сети L и H
        не изменяются.
        """
        checkpoint.require(*STAGE1)
        training = training or checkpoint.training
        if training.unet != checkpoint.unet:
            training = replace(training, unet=checkpoint.unet)
        g = _data(measurements)
        f = _data(objects)
        f_lf, f_hf = cls.band_outputs(checkpoint, g)
        train_idx, val_idx = checkpoint.train_indices, checkpoint.val_indices
        trainer = NetworkTrainer(training, label="DNN-S")
        history = trainer.fit(
            f_lf[train_idx], f[train_idx], f_lf[val_idx], f[val_idx],
            offsets=f_hf[train_idx], val_offsets=f_hf[val_idx],
        )
        checkpoint.networks["S"] = trainer.model
        checkpoint.epochs_done["S"] = training.epochs
        return history

    @classmethod
    def reconstruct_batch(cls, checkpoint: PipelineCheckpoint, measurements) -> list:
        """f̂_LF, f̂_HF, f̂ = S(f̂_LF) + f̂_HF и линейный базовый результат"""
        checkpoint.require("L", "H", "S")
        n = checkpoint.forward.n
        for g in measurements:
            if g.shape != (n, n):
                raise ShapeMismatchError((n, n), g.shape, what="measurement grid")
        g_stack = _data(measurements)
        f_lf, f_hf = cls.band_outputs(checkpoint, g_stack)
        f_hat = checkpoint.networks["S"].predict(f_lf, checkpoint.training.batch_size) + f_hf
        results = []
        for k, g in enumerate(measurements):
            wiener = None
            if checkpoint.wiener is not None:
                wiener = wiener_apply(checkpoint.wiener, g)
            results.append(Reconstruction(
                f_lf=FloatRaster(f_lf[k], g.pitch),
                f_hf=FloatRaster(f_hf[k], g.pitch),
                f_hat=FloatRaster(f_hat[k], g.pitch),
                wiener=wiener,
            ))
        return results

    @classmethod
    def reconstruct(cls, g: FloatRaster, checkpoint: PipelineCheckpoint) -> Reconstruction:
        return cls.reconstruct_batch(checkpoint, [g])[0]
