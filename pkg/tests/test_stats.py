# -*- coding: utf-8 -*-

"""Tests for the Wilcoxon signed-rank test."""

import itertools as itt
import unittest

import numpy as np
from scipy.stats import rankdata

from salsr.stats import PairedSample, compare_tables, wilcoxon_signed_rank
from salsr.utils import ConfigError, InsufficientDataError


def _brute_force_p(diff) -> float:
    """Enumerate every sign assignment of the ranks."""
    diff = np.asarray(diff, dtype=float)
    diff = diff[diff != 0]
    ranks = rankdata(np.abs(diff))
    w_plus = ranks[diff > 0].sum()
    observed = min(w_plus, ranks.sum() - w_plus)
    hits = 0
    for signs in itt.product([0, 1], repeat=len(ranks)):
        positive = ranks[np.array(signs, dtype=bool)].sum()
        hits += min(positive, ranks.sum() - positive) <= observed + 1e-9
    return min(1.0, hits / 2 ** len(ranks))


class TestWilcoxon(unittest.TestCase):
    """Tests for :func:`wilcoxon_signed_rank`."""

    def test_all_positive(self):
        """Test five positive differences."""
        result = wilcoxon_signed_rank(PairedSample([1, 2, 3, 4, 5], [0, 0, 0, 0, 0]))
        self.assertEqual(0.0, result.w_statistic)
        self.assertEqual(0.0625, result.p_two_sided)
        self.assertEqual(5, result.n)
        self.assertEqual("exact", result.method)

    def test_brute_force(self):
        """Test exact p-values against enumeration, with and without ties."""
        rng = np.random.default_rng(0)
        for n in (5, 8, 12):
            for trial in range(3):
                with self.subTest(n=n, trial=trial):
                    xs = rng.normal(size=n)
                    ys = rng.normal(size=n)
                    if trial == 2:
                        xs = np.round(xs, 1)
                        ys = np.round(ys, 1)
                        ys[0] = xs[0] + 0.5
                        ys[1] = xs[1] - 0.5
                    diff = np.asarray(xs) - np.asarray(ys)
                    if np.count_nonzero(diff) < 5:
                        continue
                    result = wilcoxon_signed_rank(PairedSample(list(xs), list(ys)))
                    self.assertAlmostEqual(_brute_force_p(diff), result.p_two_sided, places=12)

    def test_symmetric(self):
        """Test that swapping the samples keeps the statistic and p-value."""
        rng = np.random.default_rng(1)
        xs, ys = list(rng.random(9)), list(rng.random(9))
        forward = wilcoxon_signed_rank(PairedSample(xs, ys))
        backward = wilcoxon_signed_rank(PairedSample(ys, xs))
        self.assertEqual(forward.w_statistic, backward.w_statistic)
        self.assertAlmostEqual(forward.p_two_sided, backward.p_two_sided)

    def test_zeros_dropped(self):
        """Test that zero differences are discarded."""
        result = wilcoxon_signed_rank(PairedSample([1, 2, 3, 4, 5, 7, 7], [0, 0, 0, 0, 0, 7, 7]))
        self.assertEqual(5, result.n)
        self.assertEqual(0.0625, result.p_two_sided)

    def test_approximation(self):
        """Test that the normal approximation is close to the exact value at twenty pairs."""
        rng = np.random.default_rng(2)
        xs, ys = list(rng.normal(0.3, 1, 20)), list(rng.normal(0, 1, 20))
        exact = wilcoxon_signed_rank(PairedSample(xs, ys), method="exact")
        approx = wilcoxon_signed_rank(PairedSample(xs, ys), method="approx")
        self.assertEqual("approx", approx.method)
        self.assertAlmostEqual(exact.p_two_sided, approx.p_two_sided, delta=0.02)
        self.assertEqual("approx", wilcoxon_signed_rank(PairedSample(xs + [1.0], ys + [0.0])).method)

    def test_errors(self):
        """Test the rejected inputs."""
        with self.assertRaises(InsufficientDataError):
            wilcoxon_signed_rank(PairedSample([1, 2, 3, 4], [0, 0, 0, 0]))
        with self.assertRaises(ConfigError):
            PairedSample([1, 2], [1])
        with self.assertRaises(ConfigError):
            PairedSample([], [])
        with self.assertRaises(ConfigError):
            PairedSample([1.0, float("nan")], [0.0, 0.0])
        with self.assertRaises(ConfigError):
            wilcoxon_signed_rank(PairedSample([1, 2, 3, 4, 5], [0] * 5), method="bogus")  # type:ignore


class TestCompareTables(unittest.TestCase):
    """Tests for :func:`compare_tables`."""

    def test_keyed(self):
        """Test that rows pair by image name and non-finite columns are skipped."""
        a_rows = [{"image": f"i{i}", "ssim": 0.9 + i / 100, "psnr_db": float("inf")} for i in range(6)]
        b_rows = [{"image": f"i{i}", "ssim": 0.5 + i / 1000, "psnr_db": 30.0} for i in reversed(range(6))]
        results = compare_tables(a_rows, b_rows, ["ssim", "psnr_db"])
        self.assertEqual({"ssim"}, set(results))
        self.assertEqual(0.0, results["ssim"].w_statistic)
        self.assertEqual(6, results["ssim"].n)

    def test_positional(self):
        """Test positional pairing and its length check."""
        with self.assertRaises(ConfigError):
            compare_tables([{"s3": 1.0}], [], ["s3"])
        results = compare_tables([{"s3": 1.0}] * 3, [{"s3": 0.0}] * 3, ["s3"])
        self.assertEqual({}, results)
