import numpy as np
from django.test import SimpleTestCase

from optics.exceptions import OpticsError
from optics.services.datasets import DatasetService
from optics.services.forward import ForwardKind
from optics.services.raster import FloatRaster, frequency_grid
from optics.services.spectral import (
    ModulationFilter,
    PsdProfile,
    demodulate,
    diagonal_cross_section,
    ensemble_psd,
    premodulate,
    profile_to_csv,
    radial_profile,
    radial_slope_fit,
)


def inverse_square_psd(n):
    grid = frequency_grid(n)
    r = grid.r
    r[grid.center, grid.center] = 1.0
    return r ** -2.0


class PremodulationTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(4)

    def test_zero_exponent_is_identity(self):
        f = FloatRaster(self.rng.uniform(0, 1, (16, 16)))
        self.assertIs(premodulate(f, 0.0), f)

    def test_constant_becomes_zero(self):
        out = premodulate(FloatRaster(np.full((32, 32), 0.7)), 1.5)
        self.assertLess(np.max(np.abs(out.data)), 1e-12)

    def test_cosine_is_scaled_by_radius(self):
        n = 64
        x = np.arange(n)
        wave = np.tile(np.cos(2 * np.pi * 16 * x / n), (n, 1))
        out = premodulate(FloatRaster(0.5 + 0.25 * wave), 1.0)
        np.testing.assert_allclose(out.data, 0.0625 * wave, atol=1e-12)
        back = demodulate(out, 1.0)
        np.testing.assert_allclose(back.data, 0.25 * wave, atol=1e-12)

    def test_demodulation_recovers_zero_mean_object(self):
        f = self.rng.uniform(0, 1, (32, 32))
        back = demodulate(premodulate(FloatRaster(f), 1.5), 1.5)
        self.assertLess(np.max(np.abs(back.data - (f - f.mean()))), 1e-9)

    def test_negative_exponents_rejected(self):
        f = FloatRaster(np.zeros((8, 8)))
        with self.assertRaises(OpticsError):
            premodulate(f, -1.0)
        with self.assertRaises(OpticsError):
            demodulate(f, 0.0)
        with self.assertRaises(OpticsError):
            ModulationFilter.for_grid(8, -0.5)

    def test_filter_is_zero_at_dc(self):
        values = ModulationFilter.for_grid(16, 2.0).values
        self.assertEqual(values[8, 8], 0.0)
        self.assertAlmostEqual(values[8, 12], 0.25 ** 2)


class EnsemblePsdTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(8)

    def test_constant_has_power_only_at_dc(self):
        n = 16
        psd = ensemble_psd([FloatRaster(np.full((n, n), 0.5))])
        self.assertAlmostEqual(psd[8, 8], (0.5 * n) ** 2)
        psd[8, 8] = 0
        self.assertLess(np.max(psd), 1e-20)

    def test_white_noise_is_flat(self):
        images = [FloatRaster(self.rng.standard_normal((64, 64))) for _ in range(200)]
        psd = ensemble_psd(images)
        level = psd.mean()
        self.assertLess(abs(level - 1.0), 0.01)
        deviation = np.abs(psd / level - 1.0)
        # хвост хи-квадрат при 200 реализациях: единичные бины могут выйти за 25%
        self.assertLessEqual(np.count_nonzero(deviation > 0.25), 12)
        self.assertLess(deviation.max(), 0.5)
        profile = radial_profile(psd)
        rings = (profile.frequencies > 0) & (profile.frequencies <= 0.5)
        self.assertLess(np.max(np.abs(profile.power[rings] / level - 1.0)), 0.25)

    def test_sign_does_not_change_power(self):
        x = self.rng.standard_normal((16, 16))
        single = ensemble_psd([FloatRaster(x)])
        pair = ensemble_psd([FloatRaster(x), FloatRaster(-x)])
        np.testing.assert_allclose(pair, single, rtol=1e-12)

    def test_empty_and_mismatched(self):
        with self.assertRaises(OpticsError):
            ensemble_psd([])
        with self.assertRaises(OpticsError):
            ensemble_psd([FloatRaster(np.zeros((8, 8))), FloatRaster(np.zeros((16, 16)))])


class ProfileTests(SimpleTestCase):

    def test_diagonal_length(self):
        for n in (15, 16):
            profile = diagonal_cross_section(np.ones((n, n)))
            self.assertEqual(len(profile.power), n - n // 2)
            self.assertEqual(profile.frequencies[0], 0.0)
            self.assertAlmostEqual(profile.frequencies[1], np.sqrt(2) / n)

    def test_radial_profile_of_flat_psd(self):
        profile = radial_profile(np.full((32, 32), 3.0))
        np.testing.assert_allclose(profile.power, 3.0)
        self.assertEqual(profile.frequencies[0], 0.0)

    def test_inverse_square_slope(self):
        slope = radial_slope_fit(inverse_square_psd(64))
        self.assertLess(abs(slope + 2.0), 0.1)

    def test_white_slope_is_flat(self):
        self.assertLess(abs(radial_slope_fit(np.ones((64, 64)))), 1e-9)

    def test_premodulation_shifts_ensemble_slope(self):
        objects = DatasetService.synthesize(200, 64, seed=12, kind=ForwardKind.DLI)
        base = radial_slope_fit(ensemble_psd(objects))
        self.assertLess(abs(base + 2.0), 0.1)
        for p in (1.0, 1.5):
            with self.subTest(p=p):
                modulated = ensemble_psd([premodulate(f, p) for f in objects])
                self.assertLess(abs(radial_slope_fit(modulated) - base - 2 * p), 0.15)

    def test_premodulated_white_noise_slope(self):
        rng = np.random.default_rng(3)
        noise = [FloatRaster(rng.standard_normal((64, 64))) for _ in range(200)]
        modulated = ensemble_psd([premodulate(f, 1.0) for f in noise])
        self.assertLess(abs(radial_slope_fit(modulated) - radial_slope_fit(ensemble_psd(noise)) - 2.0), 0.1)

    def test_fit_range_errors(self):
        psd = np.ones((64, 64))
        with self.assertRaises(OpticsError):
            radial_slope_fit(psd, rmin=0.0)
        with self.assertRaises(OpticsError):
            radial_slope_fit(psd, rmin=0.3, rmax=0.2)
        with self.assertRaises(OpticsError):
            radial_slope_fit(psd, rmin=0.1, rmax=0.11)

    def test_profile_validation(self):
        with self.assertRaises(OpticsError):
            PsdProfile(frequencies=[0.0, 0.0], power=[1.0, 1.0])
        with self.assertRaises(OpticsError):
            PsdProfile(frequencies=[0.0, 0.1], power=[1.0, -1.0])

    def test_csv_layout(self):
        text = profile_to_csv(diagonal_cross_section(np.ones((8, 8))))
        lines = text.splitlines()
        self.assertTrue(lines[0].startswith("# main diagonal"))
        self.assertEqual(lines[1], "freq_cyc_per_px,power")
        self.assertEqual(len(lines), 2 + 4)
