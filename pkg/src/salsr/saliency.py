# -*- coding: utf-8 -*-

"""Local saliency maps built from curvature and compactness.

The pipeline computes two feature maps from a gray plane:

1. the magnitude of the level-set curvature of the intensity surface, which
   responds to thin curved structures such as vessels, and
2. the compactness map, an inverted and smoothed windowed entropy, which
   responds to homogeneous compact regions.

Each feature map is turned into a uniqueness map by summing distance-weighted
absolute differences to its neighbors, and the two uniqueness maps are fused
with the weight ``w1``.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Tuple

import numpy as np
from scipy import ndimage

from .filters import (
    Derivatives,
    convolve,
    derivatives,
    derivatives_adjoint,
    gaussian_kernel,
    shift,
    shift_adjoint,
)
from .imgcore import Plane, as_plane, normalize_minmax
from .utils import ConfigError

__all__ = [
    "SaliencyConfig",
    "SaliencyComponents",
    "EPSILON",
    "raw_curvature",
    "curvature_map",
    "local_entropy",
    "compactness_map",
    "uniqueness_map",
    "saliency_map",
    "saliency_components",
    "saliency_map_backward",
]

logger = logging.getLogger(__name__)

#: Squared gradient magnitudes below this are treated as flat
EPSILON = 1e-12


@dataclass(frozen=True)
class SaliencyConfig:
    """Parameters of the saliency pipeline."""

    #: Weight of the curvature uniqueness map in the fusion
    w1: float = 0.4
    #: Side length of the entropy neighborhood
    entropy_window: int = 7
    #: Number of intensity histogram bins for the entropy
    entropy_bins: int = 8
    #: Side length of the Gaussian that smooths the compactness map
    smooth_size: int = 3
    #: Standard deviation of the Gaussian that smooths the compactness map
    smooth_sigma: float = 0.5
    #: Side length of the uniqueness neighborhood; 0 sums over the full image
    uniqueness_window: int = 7

    def __post_init__(self):
        if not 0.0 <= self.w1 <= 1.0:
            raise ConfigError(f"w1 must lie in [0, 1], got {self.w1}")
        if self.entropy_window < 3 or self.entropy_window % 2 == 0:
            raise ConfigError(f"entropy_window must be odd and >= 3, got {self.entropy_window}")
        if self.entropy_bins < 2:
            raise ConfigError(f"entropy_bins must be >= 2, got {self.entropy_bins}")
        if self.smooth_size < 1 or self.smooth_size % 2 == 0:
            raise ConfigError(f"smooth_size must be odd and positive, got {self.smooth_size}")
        if not self.smooth_sigma > 0:
            raise ConfigError(f"smooth_sigma must be positive, got {self.smooth_sigma}")
        if self.uniqueness_window != 0 and (
            self.uniqueness_window < 3 or self.uniqueness_window % 2 == 0
        ):
            raise ConfigError(
                f"uniqueness_window must be 0 or odd and >= 3, got {self.uniqueness_window}"
            )


class SaliencyComponents(NamedTuple):
    """Every intermediate map of the saliency pipeline."""

    #: Raw signed curvature
    raw_curvature: Plane
    #: Normalized curvature magnitude
    curvature: Plane
    #: Raw windowed entropy in bits
    entropy: Plane
    #: Smoothed inverted entropy
    compactness: Plane
    curvature_uniqueness: Plane
    compactness_uniqueness: Plane
    #: The fused map
    saliency: Plane


def _curvature_terms(d: Derivatives):
    g = d.fx**2 + d.fy**2
    numerator = d.fxx * d.fy**2 + d.fyy * d.fx**2 - 2.0 * d.fxy * d.fx * d.fy
    mask = g >= EPSILON
    g_safe = np.where(mask, g, 1.0)
    return g_safe, numerator, mask


def raw_curvature(p: Plane) -> Plane:
    """Compute the signed level-set curvature of a plane.

    Pixels whose squared gradient magnitude is below :data:`EPSILON` get zero.

    :raises ImageTooSmallError: if the plane is smaller than 3×3
    """
    g, numerator, mask = _curvature_terms(derivatives(p))
    return np.where(mask, numerator / g**1.5, 0.0)


def curvature_map(p: Plane) -> Plane:
    """Compute the min-max normalized curvature magnitude of a plane."""
    return normalize_minmax(np.abs(raw_curvature(p)))


def _bin_indices(p: Plane, bins: int) -> np.ndarray:
    return np.clip(np.floor(p * bins), 0, bins - 1).astype(np.int64)


def local_entropy(p: Plane, window: int = 7, bins: int = 8) -> Plane:
    """Compute the Shannon entropy in bits of each pixel's neighborhood histogram.

    Samples fall into bin ``min(floor(v * bins), bins - 1)``; neighbors outside of
    the plane replicate the nearest edge pixel.
    """
    p = as_plane(p)
    indices = _bin_indices(p, bins)
    box = np.ones((window, window), dtype=np.int64)
    area = float(window * window)
    rv = np.zeros_like(p)
    for b in range(bins):
        counts = ndimage.correlate((indices == b).astype(np.int64), box, mode="nearest")
        frac = counts / area
        nonzero = counts > 0
        rv[nonzero] -= frac[nonzero] * np.log2(frac[nonzero])
    return rv


def compactness_map(p: Plane, cfg: Optional[SaliencyConfig] = None) -> Plane:
    """Compute the smoothed inverted entropy map, high on compact regions."""
    cfg = cfg or SaliencyConfig()
    return _invert_entropy(local_entropy(p, cfg.entropy_window, cfg.entropy_bins), cfg)


def _invert_entropy(entropy: Plane, cfg: SaliencyConfig) -> Plane:
    kernel = gaussian_kernel(cfg.smooth_size, cfg.smooth_sigma)
    return convolve(1.0 - normalize_minmax(entropy), kernel)


def _window_offsets(window: int) -> Iterable[Tuple[int, int, float]]:
    radius = window // 2
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            if dy or dx:
                yield dy, dx, float(np.exp(-np.hypot(dy, dx)))


def _full_offsets(shape) -> Iterable[Tuple[int, int, float]]:
    height, width = shape
    for dy in range(-height + 1, height):
        for dx in range(-width + 1, width):
            if dy or dx:
                yield dy, dx, float(np.exp(-np.hypot(dy, dx)))


def _overlap(n: int, offset: int) -> Tuple[slice, slice]:
    """Get the source and neighbor slices of pixels whose offset neighbor is inside."""
    if offset >= 0:
        return slice(0, n - offset), slice(offset, n)
    return slice(-offset, n), slice(0, n + offset)


def _raw_uniqueness(f: Plane, window: int) -> Plane:
    rv = np.zeros_like(f)
    if window == 0:
        height, width = f.shape
        for dy, dx, weight in _full_offsets(f.shape):
            (ys, yn), (xs, xn) = _overlap(height, dy), _overlap(width, dx)
            rv[ys, xs] += weight * np.abs(f[ys, xs] - f[yn, xn])
        return rv
    for dy, dx, weight in _window_offsets(window):
        rv += weight * np.abs(f - shift(f, dy, dx))
    return rv


def _raw_uniqueness_backward(f: Plane, g: Plane, window: int) -> Plane:
    rv = np.zeros_like(f)
    if window == 0:
        height, width = f.shape
        for dy, dx, weight in _full_offsets(f.shape):
            (ys, yn), (xs, xn) = _overlap(height, dy), _overlap(width, dx)
            term = weight * g[ys, xs] * np.sign(f[ys, xs] - f[yn, xn])
            rv[ys, xs] += term
            rv[yn, xn] -= term
        return rv
    for dy, dx, weight in _window_offsets(window):
        term = weight * g * np.sign(f - shift(f, dy, dx))
        rv += term
        rv -= shift_adjoint(term, dy, dx)
    return rv


def uniqueness_map(f: Plane, window: int = 7) -> Plane:
    """Compute the normalized uniqueness (local contrast) map of a feature map.

    Each pixel sums ``exp(-distance) * |f(s) - f(neighbor)|`` over the square
    window centered on it, excluding itself, with edge-replicated neighbors.
    A window of 0 sums over every other pixel of the image instead.

    :param f: The feature map
    :param window: The odd side length of the neighborhood, or 0 for the full image
    :returns: The uniqueness map normalized to [0, 1]
    """
    f = as_plane(f, name="feature map")
    return normalize_minmax(_raw_uniqueness(f, window))


def _fuse(curvature_uniqueness: Plane, compactness_uniqueness: Plane, w1: float) -> Plane:
    return np.clip(w1 * curvature_uniqueness + (1.0 - w1) * compactness_uniqueness, 0.0, 1.0)


def saliency_components(gray: Plane, cfg: Optional[SaliencyConfig] = None) -> SaliencyComponents:
    """Run the saliency pipeline and keep every intermediate map."""
    cfg = cfg or SaliencyConfig()
    gray = as_plane(gray, name="gray image")
    raw = raw_curvature(gray)
    curvature = normalize_minmax(np.abs(raw))
    entropy = local_entropy(gray, cfg.entropy_window, cfg.entropy_bins)
    compactness = _invert_entropy(entropy, cfg)
    curvature_uniqueness = uniqueness_map(curvature, cfg.uniqueness_window)
    compactness_uniqueness = uniqueness_map(compactness, cfg.uniqueness_window)
    return SaliencyComponents(
        raw_curvature=raw,
        curvature=curvature,
        entropy=entropy,
        compactness=compactness,
        curvature_uniqueness=curvature_uniqueness,
        compactness_uniqueness=compactness_uniqueness,
        saliency=_fuse(curvature_uniqueness, compactness_uniqueness, cfg.w1),
    )


def saliency_map(gray: Plane, cfg: Optional[SaliencyConfig] = None) -> Plane:
    """Compute the local saliency map of a gray plane.

    :param gray: A plane with samples in [0, 1], at least 3×3
    :param cfg: The pipeline parameters, defaulting to :class:`SaliencyConfig`
    :returns: A map in [0, 1] with the same dimensions as the input
    """
    return saliency_components(gray, cfg).saliency


def _normalize_minmax_backward(v: Plane, g: Plane) -> Plane:
    low, high = v.min(), v.max()
    span = high - low
    if span <= 0.0:
        return np.zeros_like(v)
    u = (v - low) / span
    rv = g / span
    rv.flat[np.argmin(v)] += np.sum(g * (u - 1.0)) / span
    rv.flat[np.argmax(v)] -= np.sum(g * u) / span
    return rv


def _raw_curvature_backward(d: Derivatives, g: Plane) -> Plane:
    grad, numerator, mask = _curvature_terms(d)
    g = np.where(mask, g, 0.0)
    g15 = grad**1.5
    g25 = grad**2.5
    return derivatives_adjoint(
        Derivatives(
            fx=g * ((2.0 * d.fyy * d.fx - 2.0 * d.fxy * d.fy) / g15 - 3.0 * numerator * d.fx / g25),
            fy=g * ((2.0 * d.fxx * d.fy - 2.0 * d.fxy * d.fx) / g15 - 3.0 * numerator * d.fy / g25),
            fxx=g * d.fy**2 / g15,
            fyy=g * d.fx**2 / g15,
            fxy=g * (-2.0 * d.fx * d.fy) / g15,
        )
    )


def saliency_map_backward(
    gray: Plane,
    grad: Plane,
    cfg: Optional[SaliencyConfig] = None,
) -> Plane:
    """Compute the vector-Jacobian product of :func:`saliency_map`.

    The compactness branch is piecewise constant in the input (histogram bin
    counts only change when a sample crosses a bin edge), so its contribution
    is zero almost everywhere and only the curvature branch is differentiated.

    :param gray: The plane :func:`saliency_map` was evaluated on
    :param grad: The gradient of a scalar with respect to the saliency map
    :param cfg: The pipeline parameters
    :returns: The gradient of the scalar with respect to ``gray``
    """
    cfg = cfg or SaliencyConfig()
    gray = as_plane(gray, name="gray image")
    if cfg.w1 == 0.0:
        return np.zeros_like(gray)
    d = derivatives(gray)
    g, numerator, mask = _curvature_terms(d)
    raw = np.where(mask, numerator / g**1.5, 0.0)
    magnitude = np.abs(raw)
    curvature = normalize_minmax(magnitude)
    unique_raw = _raw_uniqueness(curvature, cfg.uniqueness_window)

    grad_unique_raw = _normalize_minmax_backward(unique_raw, cfg.w1 * np.asarray(grad))
    grad_curvature = _raw_uniqueness_backward(curvature, grad_unique_raw, cfg.uniqueness_window)
    grad_magnitude = _normalize_minmax_backward(magnitude, grad_curvature)
    return _raw_curvature_backward(d, grad_magnitude * np.sign(raw))
