# -*- coding: utf-8 -*-

"""Tests for pixel containers and image file I/O."""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from salsr.imgcore import (
    RAW_HEADER,
    RgbImage,
    as_plane,
    heatmap,
    load_image,
    normalize_minmax,
    read_raw_map,
    save_image,
    save_plane,
    select_channel,
    to_gray,
    write_raw_map,
)
from salsr.utils import (
    CorruptImageError,
    DimensionMismatchError,
    ImageIOError,
    RawMapFormatError,
    SampleValueError,
    ShapeError,
    UnreadableImageError,
    UnsupportedImageFormatError,
)


class TestPlanes(unittest.TestCase):
    """Tests for plane validation, color conversion, and normalization."""

    def test_as_plane(self):
        """Test that planes must be non-empty, two dimensional, and finite."""
        self.assertEqual(np.float64, as_plane([[1, 2]]).dtype)
        with self.assertRaises(ShapeError):
            as_plane(np.zeros(4))
        with self.assertRaises(ShapeError):
            as_plane(np.zeros((0, 3)))
        with self.assertRaises(SampleValueError):
            as_plane([[0.0, np.nan]])
        with self.assertRaises(SampleValueError):
            as_plane([[np.inf, 1.0]])

    def test_to_gray(self):
        """Test the luma weights on primary and mixed colors."""
        one, zero = np.ones((1, 1)), np.zeros((1, 1))
        self.assertAlmostEqual(0.299, to_gray(RgbImage(one, zero, zero))[0, 0])
        self.assertAlmostEqual(0.443, to_gray(RgbImage(0.5 * one, 0.5 * one, zero))[0, 0])
        for g in (0.0, 0.2, 0.7, 1.0):
            with self.subTest(gray=g):
                self.assertAlmostEqual(g, to_gray(RgbImage.from_gray(g * one))[0, 0])

    def test_to_gray_bounded(self):
        """Test that gray values lie between the smallest and largest channel value."""
        rng = np.random.default_rng(0)
        img = RgbImage.from_array(rng.random((3, 8, 8)))
        gray = to_gray(img)
        stacked = img.as_array()
        self.assertTrue(np.all(gray >= stacked.min(axis=0) - 1e-12))
        self.assertTrue(np.all(gray <= stacked.max(axis=0) + 1e-12))

    def test_select_channel(self):
        """Test selecting a single color channel."""
        img = RgbImage(np.full((2, 2), 0.1), np.full((2, 2), 0.5), np.full((2, 2), 0.9))
        np.testing.assert_array_equal(img.green, select_channel(img, "green"))
        np.testing.assert_allclose(to_gray(img), select_channel(img))
        with self.assertRaises(ValueError):
            select_channel(img, "alpha")  # type:ignore

    def test_normalize_minmax(self):
        """Test the affine map onto [0, 1]."""
        np.testing.assert_allclose([[0.0, 0.5, 1.0]], normalize_minmax([[2, 4, 6]]))
        np.testing.assert_allclose([[0.0, 0.25, 1.0]], normalize_minmax([[-1, 0, 3]]))
        np.testing.assert_array_equal(np.zeros((1, 3)), normalize_minmax([[5, 5, 5]]))

        p = np.random.default_rng(1).normal(size=(5, 7))
        once = normalize_minmax(p)
        np.testing.assert_allclose(once, normalize_minmax(once))

    def test_validate(self):
        """Test the channel invariants of RGB images."""
        with self.assertRaises(DimensionMismatchError):
            RgbImage(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2))).validate()
        with self.assertRaises(SampleValueError):
            RgbImage.from_gray(np.full((2, 2), 1.5)).validate()

    def test_heatmap(self):
        """Test that the heatmap goes from navy to red."""
        colors = heatmap(np.array([[0.0, 1.0]]))
        self.assertEqual((1, 2, 3), colors.shape)
        np.testing.assert_allclose([0.0, 0.0, 0.5], colors[0, 0])
        np.testing.assert_allclose([0.8, 0.0, 0.0], colors[0, 1])


class TestImageFiles(unittest.TestCase):
    """Tests for reading and writing image files."""

    def setUp(self) -> None:
        """Set up a temporary directory."""
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)

    def tearDown(self) -> None:
        """Remove the temporary directory."""
        self.directory.cleanup()

    def test_load_pgm(self):
        """Test that 8-bit gray samples are scaled by 255 and replicated."""
        path = self.root / "tiny.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64]))
        img = load_image(path)
        expected = np.array([[0.0, 1.0], [128 / 255, 64 / 255]])
        for channel in img:
            np.testing.assert_allclose(expected, channel)

    def test_png_round_trip(self):
        """Test that saving and loading agrees within one quantization step."""
        rng = np.random.default_rng(2)
        img = RgbImage.from_array(rng.random((3, 9, 11)))
        for suffix in (".png", ".ppm"):
            with self.subTest(suffix=suffix):
                path = self.root / f"image{suffix}"
                save_image(img, path)
                loaded = load_image(path)
                self.assertEqual((9, 11), loaded.shape)
                self.assertLessEqual(np.abs(loaded.as_array() - img.as_array()).max(), 1 / 255)

    def test_solid_white(self):
        """Test loading a solid white PNG."""
        path = self.root / "white.png"
        save_image(RgbImage.from_gray(np.ones((8, 8))), path)
        np.testing.assert_array_equal(np.ones((3, 8, 8)), load_image(path).as_array())

    def test_save_plane(self):
        """Test saving gray and heatmap renderings."""
        for value in (0.0, 1.0):
            path = self.root / f"plane-{value}.png"
            save_plane(np.full((4, 4), value), path)
            np.testing.assert_array_equal(np.full((3, 4, 4), value), load_image(path).as_array())

        path = self.root / "heat.pgm"
        save_plane(np.linspace(0, 1, 16).reshape(4, 4), path, mode="heatmap")
        self.assertEqual((4, 4), load_image(path).shape)

        with self.assertRaises(ValueError):
            save_plane(np.zeros((2, 2)), self.root / "x.png", mode="sepia")  # type:ignore

    def test_missing_file(self):
        """Test that a missing file is an unreadable I/O error."""
        with self.assertRaises(UnreadableImageError) as context:
            load_image(self.root / "nope.png")
        self.assertIsInstance(context.exception, ImageIOError)
        self.assertEqual(3, context.exception.exit_code)

    def test_unsupported_formats(self):
        """Test that ASCII netpbm and unknown formats are rejected."""
        ascii_pgm = self.root / "ascii.pgm"
        ascii_pgm.write_text("P2\n1 1\n255\n0\n")
        with self.assertRaises(UnsupportedImageFormatError):
            load_image(ascii_pgm)

        jpeg = self.root / "photo.jpg"
        jpeg.write_bytes(b"\xff\xd8\xff\xe0" + bytes(16))
        with self.assertRaises(UnsupportedImageFormatError):
            load_image(jpeg)

        with self.assertRaises(UnsupportedImageFormatError):
            save_image(RgbImage.from_gray(np.zeros((2, 2))), self.root / "out.bmp")

    def test_truncated_file(self):
        """Test that truncated pixel data is a corrupt file."""
        path = self.root / "truncated.pgm"
        path.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
        with self.assertRaises(CorruptImageError):
            load_image(path)


class TestRawMaps(unittest.TestCase):
    """Tests for raw float maps."""

    def setUp(self) -> None:
        """Set up a temporary directory."""
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)

    def tearDown(self) -> None:
        """Remove the temporary directory."""
        self.directory.cleanup()

    def test_round_trip(self):
        """Test that raw maps keep single precision values and the layout."""
        p = np.random.default_rng(3).random((5, 7))
        path = self.root / "map.map"
        write_raw_map(p, path)
        self.assertEqual(RAW_HEADER.size + 4 * 35, path.stat().st_size)
        loaded = read_raw_map(path)
        self.assertEqual((5, 7), loaded.shape)
        np.testing.assert_allclose(p, loaded, rtol=1e-6)

    def test_malformed(self):
        """Test that bad magic and truncated payloads are rejected."""
        path = self.root / "map.map"
        write_raw_map(np.zeros((2, 2)), path)
        payload = path.read_bytes()

        path.write_bytes(b"NOTAMAP!" + payload[8:])
        with self.assertRaises(RawMapFormatError):
            read_raw_map(path)

        path.write_bytes(payload[:-1])
        with self.assertRaises(RawMapFormatError):
            read_raw_map(path)

        with self.assertRaises(UnreadableImageError):
            read_raw_map(self.root / "missing.map")
