import unittest

import numpy as np

from ndecon import simulation
from ndecon.convolution import Kernel, conv_full
from ndecon.errors import ConfigError, ShapeError, UndefinedMetricError
from ndecon.simulation import NoiseSpec, PsfSpec


class PhantomTest(unittest.TestCase):
    def test_one_line(self):
        image = simulation.phantom_lines((11, 15), n_lines=1, intensity=7.0)
        self.assertEqual(np.count_nonzero(image), 15)
        np.testing.assert_array_equal(image[5], 7.0)

    def test_cross(self):
        image = simulation.phantom_lines((11, 15), n_lines=2, intensity=1.0)
        self.assertEqual(np.count_nonzero(image), 11 + 15 - 1)
        np.testing.assert_array_equal(image[5], 1.0)
        np.testing.assert_array_equal(image[:, 7], 1.0)

    def test_default(self):
        image = simulation.phantom_lines()
        self.assertEqual(image.shape, (512, 512))
        self.assertEqual(set(np.unique(image)), {0.0, 255.0})
        self.assertEqual(image[256, 256], 255.0)
        # Nine lines through the center, one pixel per column or row each
        self.assertLessEqual(np.count_nonzero(image), 9 * 512)
        self.assertGreater(np.count_nonzero(image), 8 * 512)

        with self.assertRaises(ShapeError):
            simulation.phantom_lines((2, 10))
        with self.assertRaises(ConfigError):
            simulation.phantom_lines((10, 10), n_lines=0)

    def test_texture(self):
        a = simulation.phantom_texture((64, 48), seed=3)
        b = simulation.phantom_texture((64, 48), seed=3)
        np.testing.assert_array_equal(a, b)
        self.assertEqual(a.shape, (64, 48))
        self.assertGreaterEqual(a.min(), 0.0)
        self.assertLessEqual(a.max(), 255.0)
        np.testing.assert_array_equal(a, np.rint(a))
        self.assertGreater(len(np.unique(a)), 20)


class PsfTest(unittest.TestCase):
    def test_gaussian(self):
        np.testing.assert_array_equal(simulation.gaussian_psf((1,), 3.0).values, [1.0])

        h = simulation.gaussian_psf((5, 5), 1.0)
        self.assertAlmostEqual(h.total(), 1.0, places=14)
        self.assertAlmostEqual(h.values[2, 2], 0.1621, places=4)
        np.testing.assert_allclose(h.values, h.values[::-1, :], rtol=1e-15)
        np.testing.assert_allclose(h.values, h.values[:, ::-1], rtol=1e-15)

        h = simulation.gaussian_psf((3, 5, 7), 1.5)
        self.assertEqual(h.radii, (1, 2, 3))
        np.testing.assert_allclose(h.values, h.values[::-1, ::-1, ::-1], rtol=1e-15)

        with self.assertRaises(ShapeError):
            simulation.gaussian_psf((4, 5), 1.0)
        with self.assertRaises(ConfigError):
            simulation.gaussian_psf((5, 5), 0.0)

    def test_make_psf(self):
        h = simulation.make_psf(PsfSpec("delta", (3, 5)))
        self.assertEqual(h.shape, (3, 5))
        self.assertEqual(h.values[1, 2], 1.0)
        self.assertEqual(h.total(), 1.0)

        h = simulation.make_psf(PsfSpec("custom", values=np.ones((3, 3))))
        self.assertEqual(h.total(), 9.0)

        with self.assertRaises(ConfigError):
            simulation.make_psf(PsfSpec("custom", values=np.array([1.0, -1.0, 1.0])))
        with self.assertRaises(ConfigError):
            PsfSpec("airy")
        with self.assertRaises(ConfigError):
            PsfSpec("custom")


class NoiseTest(unittest.TestCase):
    def test_zero_std(self):
        t = np.arange(12.0).reshape(3, 4)
        y = simulation.add_gaussian_noise(t, NoiseSpec(mean=2.5, std_dev=0.0, seed=1))
        np.testing.assert_array_equal(y, t + 2.5)

    def test_statistics(self):
        spec = NoiseSpec(mean=1.0, std_dev=5.0, seed=42)
        y = simulation.add_gaussian_noise(np.zeros((512, 512)), spec)
        self.assertLess(abs(np.mean(y) - 1.0), 3.0 * 5.0 / 512)
        self.assertLess(abs(np.std(y) - 5.0), 0.02 * 5.0)

    def test_determinism(self):
        t = np.zeros((20, 30))
        a = simulation.add_gaussian_noise(t, NoiseSpec(0.0, 1.0, seed=7))
        b = simulation.add_gaussian_noise(t, NoiseSpec(0.0, 1.0, seed=7))
        c = simulation.add_gaussian_noise(t, NoiseSpec(0.0, 1.0, seed=8))
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))

        # Odd sample counts take the leading samples of the stream
        z5 = simulation.standard_normal(5, seed=3)
        z6 = simulation.standard_normal(6, seed=3)
        np.testing.assert_array_equal(z5, z6[:5])

    def test_invalid_noise(self):
        with self.assertRaises(ConfigError):
            NoiseSpec(std_dev=-1.0)
        with self.assertRaises(ConfigError):
            NoiseSpec(seed=-1)

    def test_forward_model(self):
        rng = np.random.default_rng(0)
        x = rng.random((6, 7))
        h = simulation.gaussian_psf((3, 3), 1.0)
        np.testing.assert_array_equal(simulation.forward_model(x, h), conv_full(x, h))
        noise = NoiseSpec(0.0, 2.0, seed=5)
        y = simulation.forward_model(x, h, noise)
        np.testing.assert_array_equal(
            y, simulation.add_gaussian_noise(conv_full(x, h), noise)
        )


class MetricsTest(unittest.TestCase):
    def test_snr(self):
        ref = np.array([3.0, 4.0])
        self.assertEqual(simulation.snr_db(ref, ref), float("inf"))
        self.assertEqual(simulation.snr_db(ref, np.zeros(2)), 0.0)
        self.assertAlmostEqual(simulation.snr_db(ref, [3.0, 3.0]), 13.979, places=3)

        with self.assertRaises(UndefinedMetricError):
            simulation.snr_db(np.zeros(2), [1.0, 1.0])
        with self.assertRaises(ShapeError):
            simulation.snr_db(ref, [3.0, 4.0, 0.0])

    def test_aligned_crop(self):
        rng = np.random.default_rng(1)
        x = rng.random((5, 4))
        h = Kernel.delta((2, 1))
        y = conv_full(x, h)
        np.testing.assert_array_equal(simulation.aligned_crop(y, h, x.shape), x)
        with self.assertRaises(ShapeError):
            simulation.aligned_crop(y, h, (4, 4))

    def test_relative_residual(self):
        rng = np.random.default_rng(2)
        x = rng.random((5, 5))
        h = simulation.gaussian_psf((3, 3), 1.0)
        y = conv_full(x, h)
        self.assertEqual(simulation.relative_residual(x, y, h), 0.0)
        self.assertAlmostEqual(simulation.relative_residual(np.zeros((5, 5)), y, h), 1.0)
        with self.assertRaises(UndefinedMetricError):
            simulation.relative_residual(x, np.zeros((7, 7)), h)


if __name__ == "__main__":
    unittest.main()
