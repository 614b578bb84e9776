# -*- coding: utf-8 -*-

"""Tests for image quality metrics and metric tables."""

import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
from scipy import ndimage

from salsr.filters import gaussian_kernel
from salsr.imgcore import RgbImage
from salsr.metrics import (
    CSV_COLUMNS,
    MetricsReport,
    evaluate_pair,
    psnr,
    read_report_csv,
    rmse,
    s3_sharpness,
    ssim,
    write_report_csv,
)
from salsr.utils import DimensionMismatchError, ImageTooSmallError


def _direct_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Compute SSIM window by window."""
    w = gaussian_kernel(11, 1.5).weights
    c1, c2 = 0.01**2, 0.03**2
    values = []
    for y in range(a.shape[0] - 10):
        for x in range(a.shape[1] - 10):
            pa, pb = a[y : y + 11, x : x + 11], b[y : y + 11, x : x + 11]
            mu_a, mu_b = np.sum(w * pa), np.sum(w * pb)
            var_a = np.sum(w * (pa - mu_a) ** 2)
            var_b = np.sum(w * (pb - mu_b) ** 2)
            cov = np.sum(w * (pa - mu_a) * (pb - mu_b))
            values.append(
                (2 * mu_a * mu_b + c1) * (2 * cov + c2) / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(values))


class TestMetrics(unittest.TestCase):
    """Tests for the individual metrics."""

    def setUp(self) -> None:
        """Set up a random texture."""
        self.rng = np.random.default_rng(0)
        self.a = self.rng.random((32, 32))

    def test_identical(self):
        """Test the metrics of identical planes."""
        self.assertAlmostEqual(1.0, ssim(self.a, self.a), places=12)
        self.assertEqual(0.0, rmse(self.a, self.a))
        self.assertEqual(math.inf, psnr(self.a, self.a))

    def test_psnr(self):
        """Test that an MSE of 1e-4 is 40 dB."""
        b = self.a + 0.01
        self.assertAlmostEqual(0.01, rmse(self.a, b), places=12)
        self.assertAlmostEqual(40.0, psnr(self.a, b), places=9)

    def test_ssim_direct(self):
        """Test SSIM against a window-by-window computation on random pairs."""
        for seed in range(20):
            with self.subTest(seed=seed):
                rng = np.random.default_rng(seed)
                a = rng.random((24, 24))
                b = np.clip(a + 0.1 * rng.normal(size=a.shape), 0, 1)
                self.assertAlmostEqual(_direct_ssim(a, b), ssim(a, b), delta=1e-9)

    def test_ssim_inverse(self):
        """Test that a binary pattern and its inverse have negative SSIM."""
        a = (np.random.default_rng(1).random((32, 32)) > 0.5).astype(np.float64)
        self.assertLess(ssim(a, 1.0 - a), 0.0)

    def test_ssim_symmetric(self):
        """Test that SSIM is symmetric and degrades with noise."""
        b = np.clip(self.a + 0.05 * self.rng.normal(size=self.a.shape), 0, 1)
        c = np.clip(self.a + 0.2 * self.rng.normal(size=self.a.shape), 0, 1)
        self.assertAlmostEqual(ssim(self.a, b), ssim(b, self.a), places=12)
        self.assertGreater(ssim(self.a, b), ssim(self.a, c))

    def test_errors(self):
        """Test that mismatched and tiny planes are rejected."""
        with self.assertRaises(DimensionMismatchError):
            rmse(self.a, self.a[:-1])
        with self.assertRaises(ImageTooSmallError):
            ssim(np.zeros((10, 20)), np.zeros((10, 20)))
        with self.assertRaises(ImageTooSmallError):
            s3_sharpness(np.zeros((31, 64)))

    def test_s3_blur(self):
        """Test that sharpness strictly drops as the blur grows."""
        scores = [s3_sharpness(self.a)]
        for sigma in (0.5, 1.0, 2.0):
            scores.append(s3_sharpness(ndimage.gaussian_filter(self.a, sigma, mode="nearest")))
        for sharper, smoother in zip(scores, scores[1:]):
            self.assertGreater(sharper, smoother)
        for score in scores:
            self.assertGreaterEqual(score, 0.0)
            self.assertLessEqual(score, 1.0)

    def test_s3_constant(self):
        """Test that a constant plane has no sharpness."""
        self.assertEqual(0.0, s3_sharpness(np.full((32, 40), 0.5)))


class TestReports(unittest.TestCase):
    """Tests for evaluating pairs and writing tables."""

    def test_evaluate_pair(self):
        """Test that metrics are computed on the selected channel."""
        rng = np.random.default_rng(1)
        hr = RgbImage.from_array(rng.random((3, 32, 32)))
        sr = RgbImage(hr.red, np.clip(hr.green + 0.01, 0, 1), hr.blue)

        report = evaluate_pair(hr, sr, 2, channel="red")
        self.assertEqual(math.inf, report.psnr_db)
        self.assertEqual(2, report.scale)
        self.assertEqual("inf", report.to_dict()["psnr_db"])

        report = evaluate_pair(hr, sr, 4, channel="green")
        self.assertLess(report.ssim, 1.0)
        self.assertGreater(report.rmse, 0.0)

        with self.assertRaises(DimensionMismatchError):
            evaluate_pair(hr, RgbImage.from_gray(np.zeros((32, 30))), 2)

    def test_csv(self):
        """Test writing and reading a metrics table."""
        reports = [
            MetricsReport(ssim=0.9, rmse=0.1, psnr_db=20.0, s3=0.3, scale=2),
            MetricsReport(ssim=1.0, rmse=0.0, psnr_db=math.inf, s3=0.4, scale=2),
        ]
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "metrics.csv"
            write_report_csv([reports[0].csv_row("a.png")], path)
            write_report_csv([reports[1].csv_row("b.png")], path)
            self.assertEqual(",".join(CSV_COLUMNS), path.read_text().splitlines()[0])
            rows = read_report_csv(path)
        self.assertEqual(["a.png", "b.png"], [row["image"] for row in rows])
        self.assertEqual(0.9, rows[0]["ssim"])
        self.assertEqual(math.inf, rows[1]["psnr_db"])
