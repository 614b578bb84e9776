# -*- coding: utf-8 -*-

"""Tests for the generator and discriminator architectures."""

import unittest

import numpy as np

from salsr.gan import (
    DiscriminatorSpec,
    GeneratorSpec,
    build_discriminator,
    build_generator,
    generator_parameter_count,
)
from salsr.gan.models import discriminator_feature_size, spec_to_dict
from salsr.nn import Conv2d, Dense, init_params
from salsr.utils import ConfigError, ImageTooSmallError


class TestGenerator(unittest.TestCase):
    """Tests for :func:`build_generator`."""

    def setUp(self) -> None:
        """Set up a small generator."""
        self.spec = GeneratorSpec(n_residual_blocks=2, base_channels=8)
        self.net = init_params(build_generator(self.spec), 0)

    def test_shape(self):
        """Test that a stage doubles both dimensions."""
        out = self.net.forward(np.random.default_rng(0).random((1, 1, 16, 16)), mode="infer")
        self.assertEqual((1, 1, 32, 32), out.shape)
        color = init_params(build_generator(GeneratorSpec(n_residual_blocks=1, base_channels=4, channels=3)), 0)
        self.assertEqual((2, 3, 12, 20), color.forward(np.zeros((2, 3, 6, 10)), mode="infer").shape)

    def test_zero_head(self):
        """Test that a zeroed output convolution gives a constant image."""
        head = self.net[-1]
        self.assertIsInstance(head, Conv2d)
        head.params["weight"].data = np.zeros_like(head.params["weight"].data)
        head.params["bias"].data = np.full_like(head.params["bias"].data, 0.25)
        rng = np.random.default_rng(1)
        for _ in range(2):
            np.testing.assert_array_equal(
                np.full((1, 1, 16, 16), 0.25, dtype=np.float32),
                self.net.forward(rng.random((1, 1, 8, 8)), mode="infer"),
            )

    def test_parameter_count(self):
        """Test the closed-form parameter count against the built networks."""
        for spec in [
            self.spec,
            GeneratorSpec(),
            GeneratorSpec(n_residual_blocks=16, base_channels=64, channels=3),
            GeneratorSpec(n_residual_blocks=1, base_channels=5, kernel=5),
        ]:
            with self.subTest(spec=spec):
                self.assertEqual(generator_parameter_count(spec), build_generator(spec).num_parameters())

    def test_invalid(self):
        """Test that invalid specs are rejected."""
        for kwargs in [
            {"n_residual_blocks": 0},
            {"base_channels": 0},
            {"kernel": 4},
            {"channels": 2},
            {"upscale_per_stage": 4},
        ]:
            with self.subTest(**kwargs), self.assertRaises(ConfigError):
                GeneratorSpec(**kwargs)

    def test_spec_to_dict(self):
        """Test the serialized spec."""
        rv = spec_to_dict(self.spec)
        self.assertEqual("GeneratorSpec", rv["type"])
        self.assertEqual(2, rv["n_residual_blocks"])


class TestDiscriminator(unittest.TestCase):
    """Tests for :func:`build_discriminator`."""

    def test_dense_input(self):
        """Test that four stride-2 convolutions shrink 64 pixels to 4."""
        spec = DiscriminatorSpec(channels=3)
        self.assertEqual((64, 64, 128, 128, 256, 256, 512, 512), spec.conv_channels())
        self.assertEqual((1, 2, 1, 2, 1, 2, 1, 2), spec.conv_strides())
        self.assertEqual(512 * 4 * 4, discriminator_feature_size(spec, 64))
        net = build_discriminator(spec, 64)
        dense = [layer for layer in net.layers if isinstance(layer, Dense)]
        self.assertEqual([(512 * 4 * 4, 1024), (1024, 1)], [(d.in_features, d.out_features) for d in dense])

    def test_probabilities(self):
        """Test that outputs are per-item probabilities strictly inside (0, 1)."""
        spec = DiscriminatorSpec(base_channels=4, dense_width=8)
        net = init_params(build_discriminator(spec, 32), 0)
        rng = np.random.default_rng(2)
        out = net.forward(rng.random((2, 1, 32, 32)), mode="infer")
        self.assertEqual((2, 1, 1, 1), out.shape)
        self.assertTrue(np.all((out > 0) & (out < 1)))

        out = net.forward(100.0 * rng.normal(size=(4, 1, 32, 32)), mode="infer")
        self.assertEqual((4, 1, 1, 1), out.shape)
        self.assertTrue(np.all((out > 0) & (out < 1)))

    def test_odd_size(self):
        """Test that odd sizes round up at every stride."""
        spec = DiscriminatorSpec(base_channels=2, dense_width=4)
        self.assertEqual(16 * 2 * 3, discriminator_feature_size(spec, (17, 40)))
        net = init_params(build_discriminator(spec, (17, 40)), 0)
        self.assertEqual((1, 1, 1, 1), net.forward(np.zeros((1, 1, 17, 40)), mode="infer").shape)

    def test_invalid(self):
        """Test that invalid specs and tiny inputs are rejected."""
        for kwargs in [{"n_conv_layers": 6}, {"leaky_slope": 1.0}, {"dense_width": 0}, {"channels": 4}]:
            with self.subTest(**kwargs), self.assertRaises(ConfigError):
                DiscriminatorSpec(**kwargs)
        with self.assertRaises(ImageTooSmallError):
            build_discriminator(DiscriminatorSpec(), 8)
