# -*- coding: utf-8 -*-

"""Synthesis of low-resolution images and the bicubic upscaling baseline."""

import logging
import math
from typing import Any, Dict, Union

import numpy as np

from .filters import convolve, gaussian_kernel
from .imgcore import Plane, RgbImage, as_plane
from .utils import ConfigError, ShapeError

__all__ = [
    "SCALE_FACTORS",
    "check_scale",
    "blur_parameters",
    "degradation_metadata",
    "make_lr",
    "bicubic_upscale",
]

logger = logging.getLogger(__name__)

#: The supported super-resolution factors
SCALE_FACTORS = (2, 4, 8, 16)

#: The Catmull-Rom parameter of the cubic convolution kernel
CUBIC_A = -0.5


def check_scale(r: int) -> int:
    """Validate a scale factor.

    :raises ConfigError: if ``r`` is not one of 2, 4, 8 or 16
    """
    if r not in SCALE_FACTORS:
        raise ConfigError(f"scale factor must be one of {SCALE_FACTORS}, got {r}")
    return int(r)


def blur_parameters(r: int):
    """Get the anti-aliasing Gaussian's (sigma, kernel size) for a scale factor."""
    sigma = r / 2.0
    return sigma, 2 * math.ceil(2 * sigma) + 1


def degradation_metadata(r: int) -> Dict[str, Any]:
    """Get the parameters that reproduce :func:`make_lr` for a scale factor."""
    check_scale(r)
    sigma, size = blur_parameters(r)
    return {
        "scale": r,
        "sigma": sigma,
        "kernel_size": size,
        "offset": 0,
        "border": "replicate",
    }


def _make_lr_plane(hr: Plane, r: int) -> Plane:
    hr = as_plane(hr, name="HR image")
    height, width = hr.shape
    if height % r or width % r:
        raise ShapeError(f"HR dimensions {height}x{width} are not divisible by scale {r}")
    sigma, size = blur_parameters(r)
    return convolve(hr, gaussian_kernel(size, sigma))[::r, ::r]


def make_lr(hr: Union[Plane, RgbImage], r: int):
    """Blur an HR image with a Gaussian of standard deviation ``r / 2`` and keep every r-th pixel.

    :param hr: A plane or an RGB image whose dimensions are divisible by ``r``
    :param r: The scale factor
    :returns: The LR image, of the same kind as the input
    :raises ConfigError: if ``r`` is not a supported scale factor
    :raises ShapeError: if the dimensions are not divisible by ``r``
    """
    check_scale(r)
    if isinstance(hr, RgbImage):
        return hr.map(lambda channel: _make_lr_plane(channel, r))
    return _make_lr_plane(hr, r)


def _cubic_weight(d: np.ndarray) -> np.ndarray:
    d = np.abs(d)
    a = CUBIC_A
    near = (a + 2.0) * d**3 - (a + 3.0) * d**2 + 1.0
    far = a * d**3 - 5.0 * a * d**2 + 8.0 * a * d - 4.0 * a
    return np.where(d <= 1.0, near, np.where(d < 2.0, far, 0.0))


def _interpolation_matrix(n: int, r: int) -> np.ndarray:
    """Build the (n·r, n) matrix that samples source position ``X / r`` for each output X."""
    x = np.arange(n * r, dtype=np.float64) / r
    base = np.floor(x).astype(np.int64)
    rv = np.zeros((n * r, n))
    rows = np.arange(n * r)
    for tap in range(-1, 3):
        index = base + tap
        np.add.at(rv, (rows, np.clip(index, 0, n - 1)), _cubic_weight(x - index))
    return rv


def _upscale_plane(lr: Plane, r: int) -> Plane:
    lr = as_plane(lr, name="LR image")
    height, width = lr.shape
    wy = _interpolation_matrix(height, r)
    wx = _interpolation_matrix(width, r)
    return np.clip(wy @ lr @ wx.T, 0.0, 1.0)


def bicubic_upscale(lr: Union[Plane, RgbImage], r: int):
    """Upscale an image by ``r`` with Catmull-Rom cubic convolution.

    Output pixel X samples source position ``X / r`` so that keeping every r-th
    output pixel returns the input. Taps outside of the image replicate the edge.

    :param lr: A plane or an RGB image
    :param r: The scale factor
    :returns: The upscaled image clamped to [0, 1], of the same kind as the input
    """
    check_scale(r)
    if isinstance(lr, RgbImage):
        return lr.map(lambda channel: _upscale_plane(channel, r))
    return _upscale_plane(lr, r)
