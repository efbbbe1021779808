import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from lsdnn.services.evaluation import (
    PSD_COLUMNS,
    band_edges,
    band_masks,
    compare_psd,
    log_distance,
    make_dot_pattern,
    npcc_ceiling,
    resolve_test,
    restest_csv,
    write_psd_comparison,
)
from optics.exceptions import OpticsError, ShapeMismatchError
from optics.services.datasets import DatasetService
from lsdnn.services.metrics import npcc
from lsdnn.services.wiener import wiener_fit
from optics.services.forward import ForwardConfig, ForwardKind, dli_forward, dli_transfer
from optics.services.raster import FloatRaster, dft2, idft2
from optics.services.spectral import ensemble_psd


class DotPatternTests(SimpleTestCase):

    def test_layout(self):
        pattern = make_dot_pattern(64, spacing=5, count=2)
        self.assertEqual(pattern.row, 32)
        self.assertEqual(pattern.columns, (29, 34))
        self.assertEqual(pattern.midpoints(), [31.5])
        data = pattern.raster().data
        self.assertEqual(data.sum(), 2.0)
        self.assertEqual(data[32, 29], 1.0)

    def test_does_not_fit(self):
        with self.assertRaises(OpticsError):
            make_dot_pattern(16, spacing=5, count=3)
        with self.assertRaises(OpticsError):
            make_dot_pattern(64, spacing=1)
        with self.assertRaises(OpticsError):
            make_dot_pattern(64, count=1)


class ResolveTests(SimpleTestCase):

    def setUp(self):
        self.pattern = make_dot_pattern(64, spacing=5, count=2)

    def test_pattern_itself_is_resolved(self):
        result = resolve_test(self.pattern.raster(), self.pattern)
        self.assertTrue(result.resolved)
        self.assertEqual(result.dip_ratio, 0.0)
        self.assertEqual(result.peaks, (1.0, 1.0))

    def test_constant_has_no_peak(self):
        result = resolve_test(FloatRaster(np.full((64, 64), 0.3)), self.pattern)
        self.assertFalse(result.resolved)
        self.assertTrue(math.isnan(result.dip_ratio))
        self.assertIn("no peak", result.diagnostic)

    def test_blurred_pair_merges(self):
        cfg = ForwardConfig(kind=ForwardKind.DLI, n=64, b=7.0)
        blurred = dli_forward(self.pattern.raster(), cfg)
        result = resolve_test(blurred, self.pattern)
        self.assertFalse(result.resolved)
        self.assertGreaterEqual(result.dip_ratio, 0.95)

    def test_grid_mismatch(self):
        with self.assertRaises(ShapeMismatchError):
            resolve_test(FloatRaster(np.zeros((32, 32))), self.pattern)

    def test_csv_row(self):
        result = resolve_test(self.pattern.raster(), self.pattern)
        lines = restest_csv(self.pattern, {"fhat": result}, b=7.0).splitlines()
        self.assertTrue(lines[0].startswith("stage,n,spacing"))
        self.assertEqual(lines[1].split(",")[:6], ["fhat", "64", "5", "2", "32", "29 34"])
        self.assertEqual(lines[1].split(",")[8], "1")

    def test_csv_marks_missing_peak(self):
        result = resolve_test(FloatRaster(np.zeros((64, 64))), self.pattern)
        row = restest_csv(self.pattern, {"hf": result}).splitlines()[1].split(",")
        self.assertEqual(row[7], "n/a")
        self.assertEqual(row[8], "0")
        self.assertIn("no peak", row[9])


class PsdComparisonTests(SimpleTestCase):

    def setUp(self):
        self.objects = DatasetService.synthesize(4, 32, seed=12, kind=ForwardKind.DLI)
        cfg = ForwardConfig(kind=ForwardKind.DLI, n=32, b=7.0)
        self.measurements = [dli_forward(f, cfg) for f in self.objects]

    def test_band_masks(self):
        edges = band_edges()
        freqs = np.array([0.0, 0.1, edges[1], 0.5, edges[3], 0.8])
        masks = band_masks(freqs)
        np.testing.assert_array_equal(masks["low"], [False, True, False, False, False, False])
        np.testing.assert_array_equal(masks["mid"], [False, False, True, False, False, False])
        np.testing.assert_array_equal(masks["top"], [False, False, False, True, True, True])

    def test_log_distance(self):
        self.assertEqual(log_distance(np.array([10.0, 1.0]), np.array([1.0, 10.0])), 1.0)
        self.assertTrue(np.isfinite(log_distance(np.zeros(2), np.ones(2))))

    def test_ground_truth_distance_is_zero(self):
        comparison = compare_psd({"meas": self.measurements, "gt": self.objects})
        self.assertEqual(list(comparison.profiles), ["gt", "meas"])
        for band in ("low", "mid", "top"):
            self.assertEqual(comparison.distances["gt"][band], 0.0)

    def test_measurement_loses_top_band(self):
        comparison = compare_psd({"gt": self.objects, "meas": self.measurements})
        top = band_masks(comparison.frequencies)["top"]
        meas = comparison.profiles["meas"][top]
        gt = comparison.profiles["gt"][top]
        self.assertTrue(np.all(meas <= 1e-8 * gt))
        self.assertGreater(comparison.top_distance("meas"), 1.0)

    def test_requires_gt_and_equal_sizes(self):
        with self.assertRaises(OpticsError):
            compare_psd({"meas": self.measurements})
        with self.assertRaises(OpticsError):
            compare_psd({"gt": self.objects, "meas": self.measurements[:2]})

    def test_written_files(self):
        comparison = compare_psd({"gt": self.objects, "meas": self.measurements})
        with tempfile.TemporaryDirectory() as tmp:
            compare_path, bands_path = write_psd_comparison(comparison, Path(tmp))
            compare_lines = compare_path.read_text().splitlines()
            self.assertEqual(compare_lines[1], "freq,gt,meas")
            self.assertEqual(len(compare_lines), 2 + 16)
            bands_lines = bands_path.read_text().splitlines()
            self.assertEqual(bands_lines[0], "ensemble,low,mid,top")
            self.assertTrue(bands_lines[1].startswith("gt,0.0,0.0,0.0"))

    def test_column_order_constant(self):
        self.assertEqual(PSD_COLUMNS, ("gt", "meas", "lf", "hf", "shat", "wiener"))


class NpccCeilingTests(SimpleTestCase):
    """Без априорных знаний о спектре вне полосы NPCC не опускается ниже предела"""

    n, b = 64, 7.0

    def setUp(self):
        self.transfer = dli_transfer(self.n, self.n, self.b)
        self.objects = DatasetService.synthesize(50, self.n, seed=7, kind=ForwardKind.DLI)

    def in_band(self, f, gains=1.0):
        spectrum = dft2(f)
        return idft2(spectrum.with_data(spectrum.data * (self.transfer > 0) * gains))

    def test_band_projection_reaches_ceiling(self):
        for f in self.objects[:3]:
            ceiling = npcc_ceiling(np.abs(dft2(f).data) ** 2, self.transfer)
            self.assertAlmostEqual(npcc(self.in_band(f), f), ceiling, places=9)

    def test_ceiling_is_the_same_for_every_power_law_object(self):
        ceilings = [npcc_ceiling(np.abs(dft2(f).data) ** 2, self.transfer) for f in self.objects[:5]]
        ensemble = npcc_ceiling(ensemble_psd(self.objects), self.transfer)
        for value in ceilings:
            self.assertAlmostEqual(value, ensemble, places=9)
        # 1/f²: в полосу |k| <= 9 из 32 попадает около 70% мощности
        self.assertGreater(ensemble, -0.84)
        self.assertLess(ensemble, -0.83)

    def test_no_in_band_filter_beats_ceiling(self):
        rng = np.random.default_rng(4)
        f = self.objects[0]
        ceiling = npcc_ceiling(np.abs(dft2(f).data) ** 2, self.transfer)
        for _ in range(5):
            gains = rng.uniform(0.2, 2.0, self.transfer.shape)
            # симметрия k -> -k для центрированной четной сетки
            gains = (gains + np.roll(gains[::-1, ::-1], (1, 1), axis=(0, 1))) / 2
            self.assertGreaterEqual(npcc(self.in_band(f, gains), f), ceiling - 1e-12)

    def test_wiener_baseline_sits_at_ceiling(self):
        cfg = ForwardConfig(kind=ForwardKind.DLI, n=self.n, b=self.b)
        measurements = [dli_forward(f, cfg) for f in self.objects]
        learner = wiener_fit(zip(measurements[:40], self.objects[:40]))
        scores = [npcc(learner.apply(g), f) for g, f in zip(measurements[40:], self.objects[40:])]
        ceiling = npcc_ceiling(ensemble_psd(self.objects), self.transfer)
        self.assertGreater(float(np.mean(scores)), ceiling - 1e-3)
        self.assertLess(float(np.mean(scores)), ceiling + 0.02)

    def test_flat_psd(self):
        with self.assertRaises(OpticsError):
            npcc_ceiling(np.zeros((8, 8)), np.ones((8, 8)))
        with self.assertRaises(ShapeMismatchError):
            npcc_ceiling(np.ones((8, 8)), np.ones((4, 4)))
