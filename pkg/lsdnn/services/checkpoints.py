# ===============================
# lsdnn/services/checkpoints.py
# ===============================
"""
Формат весов .lswt:

    "LSWT" | u8 версия | u32 число тензоров |
    для каждого: u16 длина имени, имя UTF-8, u8 ранг, ранг×u32 размеры, float32 значения |
    u32 CRC-32 всех предыдущих байтов

Все целые и вещественные - little-endian.
"""
import logging
import struct
import zlib
from collections import OrderedDict
from pathlib import Path

import numpy as np

from lsdnn.exceptions import CheckpointError
from optics.utils.files import atomic_write_bytes

logger = logging.getLogger('lsdnn')

LSWT_MAGIC = b"LSWT"
LSWT_VERSION = 1
_PREAMBLE = struct.Struct("<4sBI")
_NAME_LEN = struct.Struct("<H")
_RANK = struct.Struct("<B")
_CRC = struct.Struct("<I")


def encode_weights(tensors: dict) -> bytes:
    chunks = [_PREAMBLE.pack(LSWT_MAGIC, LSWT_VERSION, len(tensors))]
    for name, value in tensors.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise CheckpointError(f"tensor name too long: {name[:40]}...")
        values = np.ascontiguousarray(value, dtype="<f4")
        if values.ndim > 0xFF:
            raise CheckpointError(f"tensor {name} has rank {values.ndim}")
        if not np.all(np.isfinite(values)):
            raise CheckpointError(f"tensor {name} contains non-finite values")
        chunks.append(_NAME_LEN.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_RANK.pack(values.ndim))
        chunks.append(struct.pack(f"<{values.ndim}I", *values.shape))
        chunks.append(values.tobytes())
    body = b"".join(chunks)
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


class _Reader:
    def __init__(self, payload: bytes, source):
        self.payload = payload
        self.offset = 0
        self.source = source

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise CheckpointError(f"{self.source}: truncated while reading {what}")
        chunk = self.payload[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: struct.Struct, what: str):
        return fmt.unpack(self.take(fmt.size, what))


def decode_weights(payload: bytes, source="<bytes>") -> OrderedDict:
    if len(payload) < _PREAMBLE.size + _CRC.size:
        raise CheckpointError(f"{source}: file too short ({len(payload)} bytes)")
    body, trailer = payload[:-_CRC.size], payload[-_CRC.size:]
    (stored_crc,) = _CRC.unpack(trailer)
    actual_crc = zlib.crc32(body) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise CheckpointError(f"{source}: CRC mismatch (stored {stored_crc:08x}, computed {actual_crc:08x})")

    reader = _Reader(body, source)
    magic, version, count = reader.unpack(_PREAMBLE, "preamble")
    if magic != LSWT_MAGIC:
        raise CheckpointError(f"{source}: bad magic {magic!r}, expected {LSWT_MAGIC!r}")
    if version != LSWT_VERSION:
        raise CheckpointError(f"{source}: unsupported version {version}")

    tensors = OrderedDict()
    for _ in range(count):
        (name_len,) = reader.unpack(_NAME_LEN, "name length")
        try:
            name = reader.take(name_len, "name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError(f"{source}: tensor name is not UTF-8") from exc
        if name in tensors:
            raise CheckpointError(f"{source}: duplicate tensor {name}")
        (rank,) = reader.unpack(_RANK, f"rank of {name}")
        dims = struct.unpack(f"<{rank}I", reader.take(4 * rank, f"dims of {name}"))
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        raw = reader.take(4 * size, f"values of {name}")
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    if reader.offset != len(body):
        raise CheckpointError(f"{source}: {len(body) - reader.offset} unexpected bytes after tensors")
    return tensors


def save_weights(tensors: dict, path) -> Path:
    path = atomic_write_bytes(path, encode_weights(tensors))
    logger.info(f"Saved {len(tensors)} tensors to {path}")
    return path


def load_weights(path) -> OrderedDict:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint file not found: {path}")
    return decode_weights(path.read_bytes(), source=path)
