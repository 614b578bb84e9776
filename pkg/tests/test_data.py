# -*- coding: utf-8 -*-

"""Tests for patch datasets."""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from salsr.degrade import make_lr
from salsr.gan import PairDataset, augment_pairs, load_directory, synthetic_patches
from salsr.imgcore import RgbImage, save_image
from salsr.saliency import SaliencyConfig, saliency_map
from salsr.utils import ConfigError, ImageIOError, ShapeError


class TestSyntheticPatches(unittest.TestCase):
    """Tests for :func:`synthetic_patches`."""

    def test_shape_and_range(self):
        """Test the shape, value range, and channel tint."""
        gray = synthetic_patches(3, size=16, seed=1)
        self.assertEqual((3, 1, 16, 16), gray.shape)
        self.assertGreaterEqual(gray.min(), 0.0)
        self.assertLessEqual(gray.max(), 1.0)
        self.assertGreater(gray.std(), 0.01)

        color = synthetic_patches(3, size=16, seed=1, channels=3)
        self.assertEqual((3, 3, 16, 16), color.shape)
        self.assertGreater(color[:, 0].mean(), color[:, 2].mean())

    def test_seeded(self):
        """Test that patches are determined by the seed."""
        np.testing.assert_array_equal(synthetic_patches(2, 16, seed=4), synthetic_patches(2, 16, seed=4))
        self.assertFalse(np.array_equal(synthetic_patches(2, 16, seed=4), synthetic_patches(2, 16, seed=5)))

    def test_invalid(self):
        """Test the rejected arguments."""
        with self.assertRaises(ConfigError):
            synthetic_patches(0)
        with self.assertRaises(ConfigError):
            synthetic_patches(1, size=4)
        with self.assertRaises(ConfigError):
            synthetic_patches(1, channels=2)


class TestPairDataset(unittest.TestCase):
    """Tests for :class:`PairDataset`."""

    def setUp(self) -> None:
        """Set up a small dataset."""
        self.hr = synthetic_patches(6, size=16, seed=0)
        self.dataset = PairDataset(self.hr, saliency=SaliencyConfig(w1=0.5))

    def test_pairs(self):
        """Test that LR partners are synthesized by degradation."""
        self.assertEqual(6, len(self.dataset))
        self.assertEqual(1, self.dataset.channels)
        self.assertEqual((16, 16), self.dataset.hr_size)
        lr, hr = self.dataset.batch([4, 1])
        self.assertEqual((2, 1, 8, 8), lr.shape)
        np.testing.assert_array_equal(self.hr[4], hr[0])
        np.testing.assert_allclose(make_lr(self.hr[1, 0], 2), lr[1, 0])

    def test_saliency(self):
        """Test that saliency maps use the dataset's configuration and are cached."""
        first = self.dataset.saliency(2)
        self.assertIs(first, self.dataset.saliency(2))
        np.testing.assert_array_equal(saliency_map(self.hr[2, 0], SaliencyConfig(w1=0.5)), first)
        self.assertEqual((3, 16, 16), self.dataset.saliency_batch([0, 2, 2]).shape)

    def test_sample_indices(self):
        """Test drawing batches with and without replacement."""
        rng = np.random.default_rng(0)
        indices = self.dataset.sample_indices(rng, 6)
        self.assertEqual(list(range(6)), sorted(indices))
        self.assertEqual(10, len(self.dataset.sample_indices(rng, 10)))

    def test_split(self):
        """Test that the last patches are held out."""
        train, heldout = self.dataset.split(2)
        self.assertEqual(4, len(train))
        self.assertEqual(2, len(heldout))
        np.testing.assert_array_equal(self.hr[4:], heldout.hr)
        np.testing.assert_array_equal(self.dataset.lr[:4], train.lr)
        for bad in (0, 6):
            with self.subTest(n=bad), self.assertRaises(ConfigError):
                self.dataset.split(bad)

    def test_invalid(self):
        """Test the rejected patch arrays."""
        with self.assertRaises(ShapeError):
            PairDataset(np.zeros((2, 16, 16)))
        with self.assertRaises(ConfigError):
            PairDataset(np.zeros((0, 1, 16, 16)))
        with self.assertRaises(ShapeError):
            PairDataset(np.zeros((1, 2, 16, 16)))
        with self.assertRaises(ShapeError):
            PairDataset(np.zeros((1, 1, 16, 16)), lr=np.zeros((1, 1, 4, 4)))

    def test_augment(self):
        """Test that augmentation appends aligned transformed copies."""
        self.assertIs(self.dataset, augment_pairs(self.dataset, 0))
        augmented = augment_pairs(self.dataset, 2, seed=3)
        self.assertEqual(18, len(augmented))
        np.testing.assert_array_equal(self.hr, augmented.hr[:6])
        np.testing.assert_allclose(make_lr(augmented.hr[10, 0], 2), augmented.lr[10, 0])
        for copy in augmented.hr[6:8]:
            self.assertAlmostEqual(np.sort(self.hr[0].ravel()).sum(), np.sort(copy.ravel()).sum())
        with self.assertRaises(ShapeError):
            augment_pairs(PairDataset(np.zeros((1, 1, 16, 32))), 1)
        with self.assertRaises(ConfigError):
            augment_pairs(self.dataset, -1)


class TestLoadDirectory(unittest.TestCase):
    """Tests for :func:`load_directory`."""

    def setUp(self) -> None:
        """Write a few images into a temporary directory."""
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)
        rng = np.random.default_rng(0)
        save_image(RgbImage.from_array(rng.random((3, 40, 70))), self.root / "a.png")
        save_image(RgbImage.from_array(rng.random((3, 32, 32))), self.root / "b.ppm")
        save_image(RgbImage.from_array(rng.random((3, 8, 8))), self.root / "tiny.png")
        (self.root / "notes.txt").write_text("not an image")

    def tearDown(self) -> None:
        """Remove the temporary directory."""
        self.directory.cleanup()

    def test_tiles(self):
        """Test that images are cut into non-overlapping patches."""
        dataset = load_directory(self.root, patch_size=32)
        self.assertEqual(3, len(dataset))
        self.assertEqual(1, dataset.channels)
        color = load_directory(self.root, patch_size=16, channel="rgb")
        self.assertEqual(2 * 4 + 2 * 2, len(color))
        self.assertEqual(3, color.channels)

    def test_errors(self):
        """Test missing directories, too-small images, and indivisible patches."""
        with self.assertRaises(ImageIOError):
            load_directory(self.root / "missing")
        with self.assertRaises(ConfigError):
            load_directory(self.root, patch_size=128)
        with self.assertRaises(ConfigError):
            load_directory(self.root, patch_size=33)
