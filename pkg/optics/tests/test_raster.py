import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from optics.exceptions import (
    HermitianResidueError,
    NonFiniteError,
    OpticsError,
    RasterFormatError,
    TruncatedRasterError,
)
from optics.services.raster import (
    FRAS_HEADER,
    FloatRaster,
    Spectrum,
    dft2,
    frequency_axis,
    frequency_grid,
    hermitian_defect,
    idft2,
    read_raster,
    write_raster,
)


class FloatRasterTests(SimpleTestCase):

    def test_rejects_non_finite(self):
        data = np.ones((4, 4))
        data[1, 2] = np.nan
        with self.assertRaises(NonFiniteError):
            FloatRaster(data)

    def test_rejects_tiny_and_bad_pitch(self):
        with self.assertRaises(OpticsError):
            FloatRaster(np.ones((1, 4)))
        with self.assertRaises(OpticsError):
            FloatRaster(np.ones((4, 4)), pitch=0.0)

    def test_data_is_read_only_copy(self):
        source = np.zeros((3, 3))
        img = FloatRaster(source)
        source[0, 0] = 5.0
        self.assertEqual(img.data[0, 0], 0.0)
        with self.assertRaises(ValueError):
            img.data[0, 0] = 1.0


class DftTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(1)

    def test_constant_image_has_only_dc(self):
        n, c = 16, 0.75
        spec = dft2(FloatRaster(np.full((n, n), c))).data.copy()
        self.assertAlmostEqual(spec[n // 2, n // 2].real, c * n, places=12)
        spec[n // 2, n // 2] = 0
        self.assertLess(np.max(np.abs(spec)), 1e-12)

    def test_center_impulse_has_flat_magnitude(self):
        n = 32
        data = np.zeros((n, n))
        data[n // 2, n // 2] = 1.0
        magnitude = np.abs(dft2(FloatRaster(data)).data)
        np.testing.assert_allclose(magnitude, 1.0 / n, atol=1e-12)

    def test_cosine_has_two_bins(self):
        n = 64
        x = np.arange(n)
        data = np.tile(np.cos(2 * np.pi * 8 * x / n), (n, 1))
        spec = dft2(FloatRaster(data)).data.copy()
        c = n // 2
        self.assertAlmostEqual(abs(spec[c, c + 8]), n / 2, places=9)
        self.assertAlmostEqual(abs(spec[c, c - 8]), n / 2, places=9)
        spec[c, c + 8] = spec[c, c - 8] = 0
        self.assertLess(np.max(np.abs(spec)), 1e-9)
        u = frequency_grid(n).u
        self.assertAlmostEqual(u[c, c + 8], 8 / 64)

    def test_parseval(self):
        for n in (16, 32, 64):
            data = self.rng.standard_normal((n, n))
            energy = np.sum(data ** 2)
            spectral = np.sum(np.abs(dft2(FloatRaster(data)).data) ** 2)
            self.assertLess(abs(energy - spectral) / energy, 1e-9)

    def test_linearity(self):
        x = self.rng.standard_normal((16, 16))
        y = self.rng.standard_normal((16, 16))
        combined = dft2(FloatRaster(2.5 * x - 0.5 * y)).data
        separate = 2.5 * dft2(FloatRaster(x)).data - 0.5 * dft2(FloatRaster(y)).data
        self.assertLess(np.max(np.abs(combined - separate)), 1e-10)

    def test_round_trip(self):
        data = self.rng.standard_normal((32, 32))
        back = idft2(dft2(FloatRaster(data))).data
        self.assertLess(np.max(np.abs(back - data)), 1e-10)

    def test_zero_spectrum(self):
        spec = Spectrum(np.zeros((8, 8), dtype=complex), du=1 / 8, dv=1 / 8)
        self.assertFalse(np.any(idft2(spec).data))

    def test_two_bin_hermitian_spectrum_is_cosine(self):
        n = 16
        c = n // 2
        data = np.zeros((n, n), dtype=complex)
        data[c, c + 3] = data[c, c - 3] = n / 2
        img = idft2(Spectrum(data, du=1 / n, dv=1 / n)).data
        x = np.arange(n)
        expected = np.tile(np.cos(2 * np.pi * 3 * x / n), (n, 1))
        np.testing.assert_allclose(img, expected, atol=1e-12)

    def test_non_hermitian_spectrum_is_rejected(self):
        n = 8
        data = np.zeros((n, n), dtype=complex)
        data[n // 2, n // 2 + 1] = 1.0
        with self.assertRaises(HermitianResidueError):
            idft2(Spectrum(data, du=1 / n, dv=1 / n))

    def test_real_input_is_hermitian(self):
        for n in (15, 16):
            spec = dft2(FloatRaster(self.rng.standard_normal((n, n))))
            self.assertLess(hermitian_defect(spec), 1e-10)


class FrequencyGridTests(SimpleTestCase):

    def test_axis_for_n4(self):
        np.testing.assert_array_equal(frequency_axis(4), [-0.5, -0.25, 0.0, 0.25])

    def test_center_and_corner(self):
        grid = frequency_grid(64)
        self.assertEqual(grid.r[32, 32], 0.0)
        self.assertAlmostEqual(grid.r[0, 0], np.sqrt(0.5), places=12)

    def test_rejects_small_grid(self):
        with self.assertRaises(OpticsError):
            frequency_grid(1)


class RasterFileTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_bitwise(self):
        data = np.random.default_rng(3).standard_normal((5, 7)).astype(np.float32)
        path = write_raster(FloatRaster(data, pitch=2.4e-5), self.root / "a.fras")
        back = read_raster(path)
        self.assertEqual(back.pitch, 2.4e-5)
        self.assertEqual(back.data.astype(np.float32).tobytes(), data.tobytes())

    def test_header_layout(self):
        path = write_raster(FloatRaster(np.zeros((3, 4)), pitch=1.0), self.root / "b.fras")
        payload = path.read_bytes()
        self.assertEqual(payload[:4], b"FRAS")
        self.assertEqual(payload[4], 1)
        self.assertEqual(struct.unpack("<II", payload[5:13]), (3, 4))
        self.assertEqual(len(payload), 21 + 3 * 4 * 4)

    def test_bad_magic(self):
        path = self.root / "bad.fras"
        path.write_bytes(b"XRAS" + b"\x00" * 40)
        with self.assertRaises(RasterFormatError):
            read_raster(path)

    def test_truncated_payload(self):
        path = self.root / "short.fras"
        path.write_bytes(FRAS_HEADER.pack(b"FRAS", 1, 10, 10, 1.0) + b"\x00" * 16)
        with self.assertRaises(TruncatedRasterError):
            read_raster(path)

    def test_non_finite_payload(self):
        path = self.root / "nan.fras"
        values = np.array([1, 2, np.inf, 4], dtype="<f4").tobytes()
        path.write_bytes(FRAS_HEADER.pack(b"FRAS", 1, 2, 2, 1.0) + values)
        with self.assertRaises(NonFiniteError):
            read_raster(path)
