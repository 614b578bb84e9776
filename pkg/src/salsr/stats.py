# -*- coding: utf-8 -*-

"""The Wilcoxon signed-rank test for paired per-image scores."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Literal, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .utils import ConfigError, InsufficientDataError

__all__ = [
    "PairedSample",
    "WilcoxonResult",
    "EXACT_THRESHOLD",
    "MINIMUM_DIFFERENCES",
    "wilcoxon_signed_rank",
    "compare_tables",
]

logger = logging.getLogger(__name__)

#: The largest number of non-zero differences for which the exact null distribution is used
EXACT_THRESHOLD = 20
#: The smallest number of non-zero differences the test accepts
MINIMUM_DIFFERENCES = 5


@dataclass(frozen=True)
class PairedSample:
    """Scores of two methods on the same images, one pair per image."""

    xs: Sequence[float]
    ys: Sequence[float]

    def __post_init__(self):
        if len(self.xs) != len(self.ys):
            raise ConfigError(f"paired samples differ in length: {len(self.xs)} vs {len(self.ys)}")
        if not len(self.xs):
            raise ConfigError("paired samples are empty")
        if not (np.all(np.isfinite(self.xs)) and np.all(np.isfinite(self.ys))):
            raise ConfigError("paired samples contain non-finite scores")

    def differences(self) -> np.ndarray:
        """Get the differences ``x - y``."""
        return np.asarray(self.xs, dtype=np.float64) - np.asarray(self.ys, dtype=np.float64)


class WilcoxonResult(NamedTuple):
    """The outcome of a Wilcoxon signed-rank test."""

    #: The smaller of the positive and negative rank sums
    w_statistic: float
    #: The two-sided p-value
    p_two_sided: float
    #: The number of non-zero differences
    n: int
    #: Either ``exact`` or ``approx``
    method: str


def _exact_p(ranks: np.ndarray, w: float) -> float:
    """Count sign assignments whose statistic is at most ``w``.

    Ties produce half-integer average ranks, so the rank sums are tracked
    doubled to stay integral. Entry ``s`` of the table counts the sign
    assignments whose doubled positive rank sum is ``s``.
    """
    doubled = np.rint(2 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for rank in doubled:
        shifted = np.zeros_like(counts)
        shifted[rank:] = counts[: total + 1 - rank]
        counts = counts + shifted
    sums = np.arange(total + 1)
    statistic = np.minimum(sums, total - sums)
    w_doubled = int(round(2 * w))
    return min(1.0, float(counts[statistic <= w_doubled].sum()) / 2 ** len(ranks))


def _approx_p(ranks: np.ndarray, abs_diff: np.ndarray, w: float) -> float:
    n = len(ranks)
    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(abs_diff, return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_sizes**3 - tie_sizes) / 48.0
    if variance <= 0:
        return 1.0
    z = max(abs(w - mean) - 0.5, 0.0) / math.sqrt(variance)
    return min(1.0, 2.0 * float(norm.sf(z)))


def wilcoxon_signed_rank(
    s: PairedSample,
    method: Literal["auto", "exact", "approx"] = "auto",
) -> WilcoxonResult:
    """Run the two-sided Wilcoxon signed-rank test on paired scores.

    Zero differences are discarded and tied absolute differences share their
    average rank. The p-value is exact for up to :data:`EXACT_THRESHOLD`
    differences and otherwise uses the normal approximation with tie-corrected
    variance and a continuity correction.

    :param s: The paired scores
    :param method: Force the ``exact`` or ``approx`` p-value, or choose automatically
    :returns: The statistic ``min(W+, W-)``, the p-value and the number of differences
    :raises InsufficientDataError: if fewer than five differences are non-zero

    >>> result = wilcoxon_signed_rank(PairedSample([1, 2, 3, 4, 5], [0, 0, 0, 0, 0]))
    >>> result.w_statistic, result.p_two_sided
    (0.0, 0.0625)
    """
    diff = s.differences()
    diff = diff[diff != 0.0]
    n = len(diff)
    if n < MINIMUM_DIFFERENCES:
        raise InsufficientDataError(MINIMUM_DIFFERENCES, n)
    abs_diff = np.abs(diff)
    ranks = rankdata(abs_diff, method="average")
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())
    w = min(w_plus, w_minus)
    if method == "auto":
        method = "exact" if n <= EXACT_THRESHOLD else "approx"
    if method == "exact":
        p = _exact_p(ranks, w)
    elif method == "approx":
        p = _approx_p(ranks, abs_diff, w)
    else:
        raise ConfigError(f"unknown method: {method}")
    return WilcoxonResult(w_statistic=w, p_two_sided=p, n=n, method=method)


def compare_tables(
    a_rows: Sequence[Mapping[str, float]],
    b_rows: Sequence[Mapping[str, float]],
    columns: Iterable[str],
    key: str = "image",
) -> Dict[str, WilcoxonResult]:
    """Test each metric column of two per-image score tables.

    Rows are paired by ``key`` when both tables carry it, otherwise by position.
    Columns holding non-finite values (e.g., infinite PSNR) or too few non-zero
    differences are skipped with a warning.

    :param a_rows: The rows of the first table
    :param b_rows: The rows of the second table
    :param columns: The metric columns to test
    :param key: The column naming the image of each row
    :returns: A mapping from column names to test results
    """
    if all(key in row for row in [*a_rows, *b_rows]):
        b_index = {row[key]: row for row in b_rows}
        missing = [row[key] for row in a_rows if row[key] not in b_index]
        if missing:
            logger.warning("skipping %d images missing from the second table", len(missing))
        pairs = [(row, b_index[row[key]]) for row in a_rows if row[key] in b_index]
    elif len(a_rows) != len(b_rows):
        raise ConfigError(f"tables differ in length: {len(a_rows)} vs {len(b_rows)}")
    else:
        pairs = list(zip(a_rows, b_rows))

    rv = {}
    for column in columns:
        xs = [float(a[column]) for a, _ in pairs]
        ys = [float(b[column]) for _, b in pairs]
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            logger.warning("skipping column %s with non-finite values", column)
            continue
        try:
            rv[column] = wilcoxon_signed_rank(PairedSample(xs, ys))
        except InsufficientDataError as e:
            logger.warning("skipping column %s: %s", column, e)
    return rv
