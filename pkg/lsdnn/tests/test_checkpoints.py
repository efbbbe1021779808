import struct
import tempfile
import zlib
from collections import OrderedDict
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from lsdnn.exceptions import CheckpointError
from lsdnn.services.checkpoints import decode_weights, encode_weights, load_weights, save_weights


class WeightFileTests(SimpleTestCase):

    def setUp(self):
        rng = np.random.default_rng(41)
        self.tensors = OrderedDict([
            ("drb0.conv1.weight", rng.standard_normal((4, 1, 3, 3)).astype(np.float32)),
            ("drb0.conv1.bias", rng.standard_normal(4).astype(np.float32)),
            ("gains.real", rng.standard_normal((8, 8)).astype(np.float32)),
        ])
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_bitwise(self):
        path = save_weights(self.tensors, self.root / "L.lswt")
        loaded = load_weights(path)
        self.assertEqual(list(loaded), list(self.tensors))
        for name, value in self.tensors.items():
            self.assertEqual(loaded[name].shape, value.shape)
            self.assertEqual(loaded[name].tobytes(), value.tobytes())

    def test_layout_prefix(self):
        payload = encode_weights(self.tensors)
        self.assertEqual(payload[:4], b"LSWT")
        self.assertEqual(payload[4], 1)
        self.assertEqual(struct.unpack("<I", payload[5:9])[0], 3)

    def test_single_byte_corruption_detected(self):
        payload = encode_weights(self.tensors)
        rng = np.random.default_rng(42)
        for position in rng.integers(0, len(payload), size=100):
            corrupted = bytearray(payload)
            corrupted[position] ^= int(rng.integers(1, 256))
            with self.assertRaises(CheckpointError):
                decode_weights(bytes(corrupted))

    def test_bad_magic_with_valid_crc(self):
        payload = encode_weights(self.tensors)
        body = b"XXXX" + payload[4:-4]
        forged = body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
        with self.assertRaisesMessage(CheckpointError, "bad magic"):
            decode_weights(forged)

    def test_truncated_and_missing(self):
        with self.assertRaises(CheckpointError):
            decode_weights(b"LSWT")
        with self.assertRaises(CheckpointError):
            load_weights(self.root / "absent.lswt")

    def test_non_finite_rejected_on_save(self):
        with self.assertRaises(CheckpointError):
            encode_weights({"w": np.array([np.nan], dtype=np.float32)})
