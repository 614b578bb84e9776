# -*- coding: utf-8 -*-

"""Tests for curvature, compactness, uniqueness, and saliency maps."""

import unittest

import numpy as np

from salsr.saliency import (
    SaliencyConfig,
    _bin_indices,
    _raw_uniqueness,
    compactness_map,
    curvature_map,
    local_entropy,
    raw_curvature,
    saliency_components,
    saliency_map,
    saliency_map_backward,
    uniqueness_map,
)
from salsr.testing import GradientCheckTestCase
from salsr.utils import ConfigError


def _blob(cy: int, cx: int, size: int = 40) -> np.ndarray:
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    r2 = (y - cy) ** 2 + (x - cx) ** 2
    return 0.1 + 0.6 * np.exp(-r2 / 18.0) + 0.2 * (np.abs(np.sqrt(r2) - 5.0) < 1.0)


class TestCurvature(unittest.TestCase):
    """Tests for the level-set curvature."""

    def test_paraboloid(self):
        """Test that the curvature of x² + y² is one over the radius."""
        y, x = np.mgrid[-32:33, -32:33].astype(np.float64)
        r = np.hypot(x, y)
        curvature = raw_curvature(x**2 + y**2)
        mask = (r >= 3) & (r <= 20)
        np.testing.assert_allclose(1.0 / r[mask], curvature[mask], rtol=0.05)

    def test_ramp(self):
        """Test that a linear ramp has no curvature in the interior."""
        _, x = np.mgrid[0:9, 0:9].astype(np.float64)
        np.testing.assert_allclose(0.0, raw_curvature(x)[1:-1, 1:-1], atol=1e-12)

    def test_flat(self):
        """Test that flat regions get zero instead of a division by zero."""
        np.testing.assert_array_equal(np.zeros((5, 5)), raw_curvature(np.full((5, 5), 0.4)))
        np.testing.assert_array_equal(np.zeros((5, 5)), curvature_map(np.full((5, 5), 0.4)))

    def test_intensity_shift(self):
        """Test that adding a constant leaves the curvature unchanged."""
        p = np.random.default_rng(0).random((10, 10))
        np.testing.assert_allclose(raw_curvature(p), raw_curvature(p + 0.25), atol=1e-9)


class TestEntropy(unittest.TestCase):
    """Tests for the windowed entropy and the compactness map."""

    def test_constant(self):
        """Test that a constant plane has zero entropy and full compactness."""
        p = np.full((9, 9), 0.3)
        np.testing.assert_array_equal(np.zeros((9, 9)), local_entropy(p))
        np.testing.assert_allclose(np.ones((9, 9)), compactness_map(p))

    def test_spread(self):
        """Test a window whose samples spread over all bins."""
        centers = (np.arange(49) % 8 + 0.5) / 8
        p = centers.reshape(7, 7)
        counts = np.array([7, 6, 6, 6, 6, 6, 6, 6]) / 49
        expected = -np.sum(counts * np.log2(counts))
        self.assertAlmostEqual(expected, local_entropy(p)[3, 3], places=12)
        self.assertAlmostEqual(3.0, local_entropy(p)[3, 3], delta=0.01)

    def test_two_values(self):
        """Test a window split between black and white."""
        p = np.ones((7, 7))
        p[:, :3] = 0.0
        expected = -(3 / 7 * np.log2(3 / 7) + 4 / 7 * np.log2(4 / 7))
        self.assertAlmostEqual(expected, local_entropy(p)[3, 3], places=12)

    def test_top_bin(self):
        """Test that the value one falls into the top bin rather than out of range."""
        indices = _bin_indices(np.array([[0.0, 0.49, 0.5, 1.0]]), 2)
        np.testing.assert_array_equal([[0, 0, 1, 1]], indices)


class TestUniqueness(unittest.TestCase):
    """Tests for the uniqueness (local contrast) map."""

    def test_bright_pixel(self):
        """Test the raw uniqueness of a single bright pixel."""
        f = np.zeros((5, 5))
        f[2, 2] = 1.0
        raw = _raw_uniqueness(f, 3)
        self.assertAlmostEqual(4 * np.exp(-1) + 4 * np.exp(-np.sqrt(2)), raw[2, 2], places=12)
        self.assertAlmostEqual(2.4440, raw[2, 2], places=4)
        self.assertEqual(1.0, uniqueness_map(f, 3)[2, 2])

    def test_full_image(self):
        """Test that a window of zero sums over every other pixel."""
        f = np.random.default_rng(1).random((4, 5))
        raw = _raw_uniqueness(f, 0)
        expected = np.zeros_like(f)
        for (y, x), value in np.ndenumerate(f):
            for (v, u), other in np.ndenumerate(f):
                if (y, x) != (v, u):
                    expected[y, x] += np.exp(-np.hypot(y - v, x - u)) * abs(value - other)
        np.testing.assert_allclose(expected, raw, rtol=1e-12)

    def test_constant(self):
        """Test that a constant feature map has zero uniqueness."""
        np.testing.assert_array_equal(np.zeros((6, 6)), uniqueness_map(np.full((6, 6), 0.5)))

    def test_range(self):
        """Test that uniqueness maps lie in [0, 1]."""
        u = uniqueness_map(np.random.default_rng(2).normal(size=(12, 12)))
        self.assertGreaterEqual(u.min(), 0.0)
        self.assertLessEqual(u.max(), 1.0)


class TestSaliency(unittest.TestCase):
    """Tests for the fused saliency map."""

    def test_config(self):
        """Test that invalid parameters are rejected."""
        for kwargs in [
            {"w1": 1.5},
            {"w1": -0.1},
            {"entropy_window": 4},
            {"entropy_window": 1},
            {"entropy_bins": 1},
            {"smooth_size": 2},
            {"smooth_sigma": 0.0},
            {"uniqueness_window": 2},
        ]:
            with self.subTest(**kwargs), self.assertRaises(ConfigError):
                SaliencyConfig(**kwargs)
        self.assertEqual(0, SaliencyConfig(uniqueness_window=0).uniqueness_window)

    def test_range_and_shape(self):
        """Test that the saliency map has the input's shape and lies in [0, 1]."""
        p = np.random.default_rng(3).random((17, 23))
        s = saliency_map(p)
        self.assertEqual(p.shape, s.shape)
        self.assertGreaterEqual(s.min(), 0.0)
        self.assertLessEqual(s.max(), 1.0)

    def test_constant(self):
        """Test that a constant image is nowhere salient."""
        np.testing.assert_array_equal(np.zeros((10, 10)), saliency_map(np.full((10, 10), 0.6)))

    def test_fusion_endpoints(self):
        """Test that the fusion weight endpoints select one uniqueness map."""
        p = _blob(20, 20)
        components = saliency_components(p)
        np.testing.assert_array_equal(
            components.curvature_uniqueness, saliency_map(p, SaliencyConfig(w1=1.0))
        )
        np.testing.assert_array_equal(
            components.compactness_uniqueness, saliency_map(p, SaliencyConfig(w1=0.0))
        )
        np.testing.assert_allclose(
            0.4 * components.curvature_uniqueness + 0.6 * components.compactness_uniqueness,
            components.saliency,
        )

    def test_translation(self):
        """Test that shifting the structure shifts the saliency map."""
        dy, dx = 2, 3
        s = saliency_map(_blob(18, 18))
        t = saliency_map(_blob(18 + dy, 18 + dx))
        np.testing.assert_allclose(s[8:30, 8:30], t[8 + dy : 30 + dy, 8 + dx : 30 + dx], atol=1e-9)


class TestSaliencyGradient(GradientCheckTestCase):
    """Tests for the vector-Jacobian product of the saliency map."""

    atol = 1e-7

    def test_gradient(self):
        """Test the saliency gradient against central differences."""
        cfg = SaliencyConfig(uniqueness_window=3)
        y, x = np.mgrid[0:7, 0:7].astype(np.float64)
        for seed in self.seeds:
            with self.subTest(seed=seed):
                rng = np.random.default_rng(seed)
                p = 0.5 + 0.2 * np.sin(x / 2.0 + seed) * np.cos(y / 3.0) + 0.05 * rng.random((7, 7))
                upstream = rng.normal(size=(7, 7))
                self.assert_function_gradient(
                    lambda value: float(np.sum(upstream * saliency_map(value, cfg))),
                    lambda value: saliency_map_backward(value, upstream, cfg),
                    p,
                )

    def test_entropy_only(self):
        """Test that the gradient vanishes when only the compactness branch is fused."""
        p = np.random.default_rng(4).random((6, 6))
        np.testing.assert_array_equal(
            np.zeros((6, 6)),
            saliency_map_backward(p, np.ones((6, 6)), SaliencyConfig(w1=0.0)),
        )
