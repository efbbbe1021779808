import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from PIL import Image

from optics.exceptions import OpticsError
from optics.services.datasets import DatasetService, MANIFEST_NAME, fit_to_grid, rescale
from optics.services.forward import ForwardKind
from optics.services.spectral import ensemble_psd, radial_slope_fit


class SynthesizeTests(SimpleTestCase):

    def test_same_seed_same_objects(self):
        a = DatasetService.synthesize(3, 32, seed=7, kind=ForwardKind.DLI)
        b = DatasetService.synthesize(3, 32, seed=7, kind=ForwardKind.DLI)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.data, y.data)
        c = DatasetService.synthesize(3, 32, seed=8, kind=ForwardKind.DLI)
        self.assertFalse(np.array_equal(a[0].data, c[0].data))

    def test_value_ranges(self):
        for obj in DatasetService.synthesize(2, 32, seed=1, kind=ForwardKind.DLI):
            self.assertAlmostEqual(obj.data.min(), 0.0)
            self.assertAlmostEqual(obj.data.max(), 1.0)
        phase = DatasetService.synthesize(2, 32, seed=1, kind=ForwardKind.QPR, phi_max=2.0)
        self.assertAlmostEqual(phase[0].data.max(), 2.0)

    def test_power_law_slope(self):
        objects = DatasetService.synthesize(1, 64, seed=3, kind=ForwardKind.DLI)
        slope = radial_slope_fit(ensemble_psd(objects))
        self.assertLess(abs(slope + 2.0), 0.1)

    def test_invalid_count(self):
        with self.assertRaises(OpticsError):
            DatasetService.synthesize(0, 16, seed=0, kind=ForwardKind.DLI)

    def test_rescale_constant(self):
        self.assertFalse(np.any(rescale(np.full((4, 4), 3.0))))


class IngestTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_gray_png_is_scaled(self):
        Image.fromarray(np.full((40, 48), 128, dtype=np.uint8)).save(self.root / "a.png")
        objects = DatasetService.ingest_png(self.root, 16, ForwardKind.DLI)
        self.assertEqual(objects[0].shape, (16, 16))
        np.testing.assert_allclose(objects[0].data, 128 / 255, atol=1e-6)

        phases = DatasetService.ingest_png(self.root, 16, ForwardKind.QPR, phi_max=np.pi)
        np.testing.assert_allclose(phases[0].data, np.pi * 128 / 255, atol=1e-5)

    def test_rgb_uses_luma_weights(self):
        red = np.zeros((20, 20, 3), dtype=np.uint8)
        red[..., 0] = 255
        Image.fromarray(red).save(self.root / "red.png")
        objects = DatasetService.ingest_png(self.root, 20, ForwardKind.DLI)
        np.testing.assert_allclose(objects[0].data, 0.299, atol=1e-9)

    def test_sorted_by_name(self):
        Image.fromarray(np.full((8, 8), 255, dtype=np.uint8)).save(self.root / "b.png")
        Image.fromarray(np.zeros((8, 8), dtype=np.uint8)).save(self.root / "a.png")
        objects = DatasetService.ingest_png(self.root, 8, ForwardKind.DLI)
        self.assertEqual(objects[0].data.max(), 0.0)
        self.assertEqual(objects[1].data.min(), 1.0)

    def test_empty_directory(self):
        with self.assertRaises(OpticsError):
            DatasetService.ingest_png(self.root, 8, ForwardKind.DLI)

    def test_center_crop(self):
        gray = np.zeros((4, 8))
        gray[:, 2:6] = 1.0
        np.testing.assert_array_equal(fit_to_grid(gray, 4), np.ones((4, 4)))


class DatasetFilesTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_write_and_open(self):
        objects = DatasetService.synthesize(2, 16, seed=5, kind=ForwardKind.DLI)
        written = DatasetService.write(objects, self.root, {"kind": "DLI", "seed": 5})
        self.assertEqual(written.names, ["obj_0000.fras", "obj_0001.fras"])

        dataset = DatasetService.open(self.root)
        self.assertEqual(len(dataset), 2)
        self.assertEqual(dataset.manifest["count"], "2")
        self.assertEqual(dataset.manifest["seed"], "5")
        np.testing.assert_allclose(dataset.load(1).data, objects[1].data, atol=1e-7)

    def test_missing_manifest(self):
        with self.assertRaises(FileNotFoundError):
            DatasetService.open(self.root)

    def test_missing_listed_file(self):
        objects = DatasetService.synthesize(1, 8, seed=0, kind=ForwardKind.DLI)
        DatasetService.write(objects, self.root, {})
        (self.root / "obj_0000.fras").unlink()
        self.assertTrue((self.root / MANIFEST_NAME).exists())
        with self.assertRaises(FileNotFoundError):
            DatasetService.open(self.root)
