# -*- coding: utf-8 -*-

"""Full-reference image quality metrics computed on the Y channel.

SSIM uses the customary constants (an 11×11 Gaussian window with standard
deviation 1.5, ``K1 = 0.01``, ``K2 = 0.03`` and a dynamic range of 1) and is
averaged over the valid (unpadded) window positions.

The S3 sharpness score here is a simplified variant of the spectral and spatial
sharpness measure. For every 8×8 block:

- the spectral measure maps the slope ``alpha`` of the log magnitude spectrum
  over radial frequency to ``1 - 1 / (1 + exp(-3 (alpha - 2)))``,
- the spatial measure is the largest total variation of any 2×2 neighborhood,
  divided by 4,

and the block score is their geometric mean. The image score is the mean of the
top 1% of block scores. Absolute values are not comparable to the published
metric; only orderings (sharper scores higher) are meaningful.
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .filters import gaussian_kernel
from .imgcore import Channel, Plane, RgbImage, as_plane, select_channel
from .utils import DimensionMismatchError, ImageTooSmallError

__all__ = [
    "MetricsReport",
    "CSV_COLUMNS",
    "METRIC_COLUMNS",
    "rmse",
    "psnr",
    "ssim",
    "ssim_map",
    "s3_sharpness",
    "evaluate_pair",
    "write_report_csv",
    "read_report_csv",
]

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

S3_BLOCK = 8
S3_MINIMUM = 32
S3_TOP_FRACTION = 0.01

CSV_COLUMNS = ["image", "scale", "ssim", "rmse", "psnr_db", "s3"]
METRIC_COLUMNS = CSV_COLUMNS[2:]


def _pair(a: Plane, b: Plane):
    a = as_plane(a, name="first image")
    b = as_plane(b, name="second image")
    if a.shape != b.shape:
        raise DimensionMismatchError([a.shape, b.shape])
    return a, b


def _mse(a: Plane, b: Plane) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def rmse(a: Plane, b: Plane) -> float:
    """Compute the root mean square error between two planes."""
    return math.sqrt(_mse(a, b))


def psnr(a: Plane, b: Plane) -> float:
    """Compute the peak signal-to-noise ratio in dB for a dynamic range of 1.

    :returns: ``10 log10(1 / MSE)``, or positive infinity for identical planes
    """
    mse = _mse(a, b)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def ssim_map(a: Plane, b: Plane) -> np.ndarray:
    """Compute the local SSIM index at every valid window position.

    :raises DimensionMismatchError: if the planes differ in size
    :raises ImageTooSmallError: if the planes are smaller than the 11×11 window
    """
    a, b = _pair(a, b)
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ImageTooSmallError(a.shape, (SSIM_WINDOW, SSIM_WINDOW), "ssim")
    weights = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA).weights

    def _filter(x: np.ndarray) -> np.ndarray:
        return np.tensordot(sliding_window_view(x, weights.shape), weights, axes=2)

    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    mu_a = _filter(a)
    mu_b = _filter(b)
    var_a = _filter(a * a) - mu_a**2
    var_b = _filter(b * b) - mu_b**2
    cov = _filter(a * b) - mu_a * mu_b
    numerator = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    denominator = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return numerator / denominator


def ssim(a: Plane, b: Plane) -> float:
    """Compute the mean structural similarity index of two planes."""
    return float(np.mean(ssim_map(a, b)))


def _radial_bins():
    freqs = np.fft.fftfreq(S3_BLOCK) * S3_BLOCK
    radius = np.rint(np.hypot(freqs[:, None], freqs[None, :])).astype(int)
    return radius


_RADIUS = _radial_bins()
_HANN = np.outer(np.hanning(S3_BLOCK), np.hanning(S3_BLOCK))
_LOG_K = np.log(np.arange(1, S3_BLOCK // 2 + 1, dtype=np.float64))


def _spectral_measure(block: np.ndarray) -> float:
    windowed = (block - block.mean()) * _HANN
    magnitude = np.abs(np.fft.fft2(windowed))
    if np.sum(magnitude**2) < 1e-12:
        return 0.0
    radial = np.array([magnitude[_RADIUS == k].mean() for k in range(1, S3_BLOCK // 2 + 1)])
    slope, _ = np.polyfit(_LOG_K, np.log(radial + 1e-12), 1)
    alpha = -slope
    return 1.0 - 1.0 / (1.0 + math.exp(-3.0 * (alpha - 2.0)))


def _spatial_measure(block: np.ndarray) -> float:
    tl, tr = block[:-1, :-1], block[:-1, 1:]
    bl, br = block[1:, :-1], block[1:, 1:]
    variation = (
        np.abs(tl - tr)
        + np.abs(tl - bl)
        + np.abs(tl - br)
        + np.abs(tr - bl)
        + np.abs(tr - br)
        + np.abs(bl - br)
    )
    return float(variation.max()) / 4.0


def s3_sharpness(a: Plane) -> float:
    """Compute the simplified S3 sharpness score of a plane.

    :param a: A plane of at least 32×32 pixels with samples in [0, 1]
    :returns: A score in [0, 1]; zero for constant planes
    :raises ImageTooSmallError: if the plane is smaller than 32×32
    """
    a = as_plane(a)
    if a.shape[0] < S3_MINIMUM or a.shape[1] < S3_MINIMUM:
        raise ImageTooSmallError(a.shape, (S3_MINIMUM, S3_MINIMUM), "s3_sharpness")
    rows, cols = a.shape[0] // S3_BLOCK, a.shape[1] // S3_BLOCK
    scores = []
    for i in range(rows):
        for j in range(cols):
            block = a[i * S3_BLOCK : (i + 1) * S3_BLOCK, j * S3_BLOCK : (j + 1) * S3_BLOCK]
            spatial = _spatial_measure(block)
            spectral = _spectral_measure(block) if spatial > 0.0 else 0.0
            scores.append(math.sqrt(spectral * spatial))
    top = max(1, int(math.ceil(S3_TOP_FRACTION * len(scores))))
    return float(np.mean(sorted(scores, reverse=True)[:top]))


@dataclass
class MetricsReport:
    """Quality metrics of a super-resolved image against its ground truth."""

    ssim: float
    rmse: float
    psnr_db: float
    s3: float
    scale: int

    def to_dict(self) -> Dict[str, Union[int, float, str]]:
        """Get the report as a JSON-ready dictionary, writing infinite PSNR as ``"inf"``."""
        rv = asdict(self)
        if math.isinf(self.psnr_db):
            rv["psnr_db"] = "inf"
        return rv

    def to_json(self) -> str:
        """Serialize the report as a single-line JSON object."""
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_row(self, image: str) -> List[str]:
        """Get a row for a CSV file with :data:`CSV_COLUMNS`."""
        return [
            image,
            str(self.scale),
            repr(self.ssim),
            repr(self.rmse),
            "inf" if math.isinf(self.psnr_db) else repr(self.psnr_db),
            repr(self.s3),
        ]


def evaluate_pair(hr: RgbImage, sr: RgbImage, r: int, channel: Channel = "luma") -> MetricsReport:
    """Compute every metric on one channel of an HR/SR pair.

    :param hr: The ground truth
    :param sr: The super-resolved image
    :param r: The scale factor, recorded in the report
    :param channel: The evaluated channel, by default the Y (luma) channel
    :raises DimensionMismatchError: if the images differ in size
    """
    if hr.shape != sr.shape:
        raise DimensionMismatchError([hr.shape, sr.shape])
    y_hr = select_channel(hr, channel)
    y_sr = select_channel(sr, channel)
    return MetricsReport(
        ssim=ssim(y_hr, y_sr),
        rmse=rmse(y_hr, y_sr),
        psnr_db=psnr(y_hr, y_sr),
        s3=s3_sharpness(y_sr),
        scale=r,
    )


def write_report_csv(rows: Sequence[List[str]], path: Union[str, Path], append: bool = True):
    """Write CSV rows, adding the header when the file is new."""
    path = Path(path)
    new = not path.exists() or not append
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a" if append else "w", newline="") as file:
        writer = csv.writer(file)
        if new:
            writer.writerow(CSV_COLUMNS)
        writer.writerows(rows)


def read_report_csv(path: Union[str, Path]) -> List[Dict[str, Union[str, float]]]:
    """Read a metrics CSV into dictionaries with float metric values."""
    with Path(path).open(newline="") as file:
        rv = []
        for row in csv.DictReader(file):
            for key in METRIC_COLUMNS:
                if key in row:
                    row[key] = float(row[key])
            rv.append(row)
    return rv
