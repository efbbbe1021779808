# ===============================
# lsdnn/services/artifacts.py
# ===============================
"""
Каталог recon/: {gt,meas,lf,hf,fhat,wiener}_NNNN.fras и manifest.txt.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

from lsdnn.exceptions import PipelineStateError
from optics.services.raster import read_raster, write_raster
from optics.utils.files import atomic_write_text, format_key_value, read_key_value

logger = logging.getLogger('lsdnn')

MANIFEST_NAME = "manifest.txt"
RECON_LABELS = ("gt", "meas", "lf", "hf", "fhat", "wiener")


@dataclass
class ReconstructionSet:
    root: Path
    indices: list
    images: dict

    def __len__(self):
        return len(self.indices)

    def image_ids(self) -> list:
        return [f"{index:04d}" for index in self.indices]


def write_reconstruction_set(out_dir, indices, objects, measurements, reconstructions,
                             extra: dict = None) -> ReconstructionSet:
    out_dir = Path(out_dir)
    images = {label: [] for label in RECON_LABELS}
    for index, f, g, rec in zip(indices, objects, measurements, reconstructions):
        row = {"gt": f, "meas": g, "lf": rec.f_lf, "hf": rec.f_hf, "fhat": rec.f_hat, "wiener": rec.wiener}
        for label in RECON_LABELS:
            if row[label] is None:
                continue
            write_raster(row[label], out_dir / f"{label}_{index:04d}.fras")
            images[label].append(row[label])
    labels = [label for label in RECON_LABELS if images[label]]
    manifest = dict(extra or {})
    manifest["indices"] = ",".join(str(i) for i in indices)
    manifest["labels"] = ",".join(labels)
    atomic_write_text(out_dir / MANIFEST_NAME, format_key_value(manifest))
    logger.info(f"Wrote {len(indices)} reconstructions ({', '.join(labels)}) to {out_dir}")
    return ReconstructionSet(out_dir, list(indices), {label: images[label] for label in labels})


def load_reconstruction_set(root) -> ReconstructionSet:
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.exists():
        raise PipelineStateError(f"missing prerequisite {manifest_path} (run reconstruct first)")
    manifest = read_key_value(manifest_path)
    indices = [int(v) for v in manifest.get("indices", "").split(",") if v]
    labels = [v for v in manifest.get("labels", "").split(",") if v]
    images = {}
    for label in labels:
        paths = [root / f"{label}_{index:04d}.fras" for index in indices]
        for path in paths:
            if not path.exists():
                raise PipelineStateError(f"reconstruction file listed in manifest is missing: {path}")
        images[label] = [read_raster(path) for path in paths]
    return ReconstructionSet(root, indices, images)
