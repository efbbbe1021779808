# ===============================
# optics/services/datasets.py
# ===============================
"""
Наборы объектов: синтетические поля со спектром 1/f² и загрузка PNG.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from django.conf import settings
from PIL import Image

from optics.exceptions import OpticsError
from optics.services.forward import ForwardKind
from optics.services.raster import FloatRaster, read_raster, write_raster
from optics.utils.files import atomic_write_text, format_key_value, read_key_value

logger = logging.getLogger('optics')

MANIFEST_NAME = "manifest.txt"

# Яркость из RGB (ITU-R 601)
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def power_law_field(n: int, rng: np.random.Generator, exponent: float = 1.0) -> np.ndarray:
    """
    Случайное поле с модулем спектра ∝ 1/r^exponent и равномерными фазами.

    Фазы берутся из ДПФ вещественного белого шума, поэтому спектр эрмитов
    и поле вещественно. При exponent=1 PSD ∝ r^-2.
    """
    noise = rng.standard_normal((n, n))
    phases = np.angle(np.fft.fft2(noise))
    fy, fx = np.meshgrid(np.fft.fftfreq(n), np.fft.fftfreq(n), indexing="ij")
    r = np.sqrt(fx ** 2 + fy ** 2)
    magnitude = np.zeros_like(r)
    nonzero = r > 0
    magnitude[nonzero] = r[nonzero] ** -exponent
    return np.fft.ifft2(magnitude * np.exp(1j * phases)).real


def rescale(data: np.ndarray, upper: float = 1.0) -> np.ndarray:
    """Линейное растяжение в [0, upper]; константа -> нули"""
    low, high = float(data.min()), float(data.max())
    if high - low <= 0:
        return np.zeros_like(data)
    return (data - low) / (high - low) * upper


def png_to_gray(path) -> np.ndarray:
    """
    PNG -> значения яркости в [0, 1].

    8 и 16 бит в градациях серого; RGB(A) переводится весами 0.299/0.587/0.114.
    """
    with Image.open(path) as img:
        mode = img.mode
        if mode == "P":
            img = img.convert("RGBA")
            mode = img.mode
        array = np.asarray(img)
    if mode in ("L", "LA"):
        gray = array[..., 0] if array.ndim == 3 else array
        return gray.astype(np.float64) / 255.0
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        return array.astype(np.float64) / 65535.0
    if mode in ("RGB", "RGBA"):
        rgb = array[..., :3].astype(np.float64)
        return rgb @ np.asarray(LUMA_WEIGHTS) / 255.0
    raise OpticsError(f"{path}: unsupported PNG mode {mode}")


def fit_to_grid(gray: np.ndarray, n: int) -> np.ndarray:
    """Центральная квадратная вырезка и билинейное масштабирование до n×n"""
    height, width = gray.shape
    side = min(height, width)
    top, left = (height - side) // 2, (width - side) // 2
    square = gray[top:top + side, left:left + side]
    if side == n:
        return square.copy()
    img = Image.fromarray(square.astype(np.float32))
    return np.asarray(img.resize((n, n), Image.BILINEAR), dtype=np.float64)


@dataclass
class ObjectDataset:
    """Набор объектов на диске: obj_NNNN.fras + manifest.txt"""

    root: Path
    names: list
    manifest: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.names)

    def path(self, index: int) -> Path:
        return self.root / self.names[index]

    def load(self, index: int) -> FloatRaster:
        return read_raster(self.path(index))

    def load_all(self) -> list:
        return [self.load(i) for i in range(len(self))]


class DatasetService:
    """Сервис генерации, загрузки и записи наборов объектов"""

    OBJECT_PATTERN = "obj_{index:04d}.fras"

    @staticmethod
    def _synthesize_one(args) -> np.ndarray:
        seed_seq, n, upper = args
        rng = np.random.default_rng(seed_seq)
        return rescale(power_law_field(n, rng), upper)

    @classmethod
    def synthesize(cls, count: int, n: int, seed: int, kind: str,
                   phi_max: float = np.pi, pitch: float = 1.0) -> list:
        """
        Синтетические объекты 1/f².

        Args:
            count: число объектов
            n: размер сетки
            seed: зерно генератора (у каждого объекта свой дочерний поток)
            kind: DLI -> значения в [0, 1]; QPR -> фаза в [0, phi_max] рад
            phi_max: верхняя граница фазы для QPR
            pitch: шаг пикселя

        Returns:
            list: список FloatRaster
        """
        if count < 1:
            raise OpticsError(f"dataset size must be >= 1, got {count}")
        upper = 1.0 if kind == ForwardKind.DLI else phi_max
        children = np.random.SeedSequence(seed).spawn(count)
        jobs = [(child, n, upper) for child in children]
        with ThreadPoolExecutor(max_workers=settings.FREQSYNTH_THREADS) as executor:
            fields = list(executor.map(cls._synthesize_one, jobs))
        logger.info(f"Synthesized {count} power-law objects: n={n}, kind={kind}, seed={seed}")
        return [FloatRaster(data, pitch) for data in fields]

    @classmethod
    def ingest_png(cls, source_dir, n: int, kind: str,
                   phi_max: float = np.pi, pitch: float = 1.0) -> list:
        """Загрузка внешних PNG (отсортированных по имени) как объектов"""
        paths = sorted(Path(source_dir).glob("*.png"))
        if not paths:
            raise OpticsError(f"no PNG files found in {source_dir}")
        upper = 1.0 if kind == ForwardKind.DLI else phi_max
        objects = []
        for path in paths:
            gray = fit_to_grid(png_to_gray(path), n)
            data = np.clip(gray, 0.0, 1.0) * upper
            objects.append(FloatRaster(data, pitch))
        logger.info(f"Ingested {len(objects)} PNG images from {source_dir}")
        return objects

    @classmethod
    def write(cls, objects, out_dir, manifest: dict,
              pattern: str = OBJECT_PATTERN) -> ObjectDataset:
        out_dir = Path(out_dir)
        names = []
        for index, obj in enumerate(objects):
            name = pattern.format(index=index)
            write_raster(obj, out_dir / name)
            names.append(name)
        full_manifest = dict(manifest)
        full_manifest["count"] = len(names)
        full_manifest["files"] = ",".join(names)
        atomic_write_text(out_dir / MANIFEST_NAME, format_key_value(full_manifest))
        logger.info(f"Wrote {len(names)} rasters to {out_dir}")
        return ObjectDataset(out_dir, names, {k: str(v) for k, v in full_manifest.items()})

    @classmethod
    def open(cls, root) -> ObjectDataset:
        root = Path(root)
        manifest_path = root / MANIFEST_NAME
        if not manifest_path.exists():
            raise FileNotFoundError(f"dataset manifest not found: {manifest_path}")
        manifest = read_key_value(manifest_path)
        names = [name for name in manifest.get("files", "").split(",") if name]
        for name in names:
            if not (root / name).exists():
                raise FileNotFoundError(f"dataset file listed in manifest is missing: {root / name}")
        return ObjectDataset(root, names, manifest)
