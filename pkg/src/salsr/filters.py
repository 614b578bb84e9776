# -*- coding: utf-8 -*-

"""Gaussian filtering and finite-difference derivatives with edge replication.

Every operator here treats the pixels outside of a plane as copies of the nearest
edge pixel. The derivative operators are linear, so :func:`derivatives_adjoint`
gives their exact transpose for backpropagation through the curvature map.
"""

import logging
from typing import Literal, NamedTuple, Optional

import numpy as np
from scipy import ndimage

from .imgcore import Plane, as_plane
from .utils import ConfigError, ImageTooSmallError

__all__ = [
    "Kernel",
    "Derivatives",
    "gaussian_kernel",
    "convolve",
    "derivatives",
    "derivatives_adjoint",
    "shift",
    "shift_adjoint",
]

logger = logging.getLogger(__name__)


class Kernel(NamedTuple):
    """A square filter kernel, optionally with its separable 1D factor."""

    #: The (size, size) weights
    weights: np.ndarray
    #: The 1D factor ``f`` such that ``weights = outer(f, f)``, if separable
    factor: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        """Get the side length of the kernel."""
        return self.weights.shape[0]

    @classmethod
    def identity(cls) -> "Kernel":
        """Get the 1×1 identity kernel."""
        return cls(np.ones((1, 1)), np.ones(1))


class Derivatives(NamedTuple):
    """First and second order partial derivatives of a plane."""

    fx: Plane
    fy: Plane
    fxx: Plane
    fyy: Plane
    fxy: Plane


def gaussian_kernel(size: int, sigma: float) -> Kernel:
    """Sample and normalize a square Gaussian kernel.

    :param size: The odd side length of the kernel
    :param sigma: The standard deviation in pixels
    :returns: A separable kernel whose weights sum to one
    :raises ConfigError: if the size is even or non-positive, or sigma is not positive

    >>> k = gaussian_kernel(3, 0.5)
    >>> round(float(k.weights[1, 1]), 4)
    0.6193
    """
    if size < 1 or size % 2 == 0:
        raise ConfigError(f"kernel size must be odd and positive, got {size}")
    if not sigma > 0:
        raise ConfigError(f"kernel sigma must be positive, got {sigma}")
    radius = size // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    factor = np.exp(-(x**2) / (2.0 * sigma**2))
    factor /= factor.sum()
    return Kernel(np.outer(factor, factor), factor)


def convolve(
    p: Plane,
    k: Kernel,
    border: Literal["replicate"] = "replicate",
    *,
    separable: bool = True,
) -> Plane:
    """Convolve a plane with a kernel, keeping its dimensions.

    :param p: The plane
    :param k: The kernel
    :param border: The border policy; only edge replication is supported
    :param separable: Apply the 1D factor along rows then columns when the kernel has one
    :returns: The filtered plane
    """
    if border != "replicate":
        raise ConfigError(f"unsupported border policy: {border}")
    p = np.asarray(p, dtype=np.float64)
    if separable and k.factor is not None:
        # flip so the separable path computes a convolution like the dense path
        factor = k.factor[::-1]
        rv = ndimage.correlate1d(p, factor, axis=0, mode="nearest")
        return ndimage.correlate1d(rv, factor, axis=1, mode="nearest")
    return ndimage.convolve(p, k.weights, mode="nearest")


def _check_size(p: Plane) -> Plane:
    p = as_plane(p)
    if p.shape[0] < 3 or p.shape[1] < 3:
        raise ImageTooSmallError(p.shape, (3, 3), "derivatives")
    return p


def _indices(n: int, offset: int) -> np.ndarray:
    return np.clip(np.arange(n) + offset, 0, n - 1)


def shift(p: Plane, dy: int, dx: int) -> Plane:
    """Get ``q[y, x] = p[clip(y + dy), clip(x + dx)]``, replicating edges."""
    height, width = p.shape
    return p[np.ix_(_indices(height, dy), _indices(width, dx))]


def shift_adjoint(g: Plane, dy: int, dx: int) -> Plane:
    """Apply the transpose of :func:`shift` to a gradient plane.

    Replicated edge pixels receive the sum of every output they were copied to.
    """
    height, width = g.shape
    rv = np.zeros_like(g, dtype=np.float64)
    np.add.at(rv, np.ix_(_indices(height, dy), _indices(width, dx)), g)
    return rv


def _dx(p: Plane) -> Plane:
    return 0.5 * (shift(p, 0, 1) - shift(p, 0, -1))


def _dy(p: Plane) -> Plane:
    return 0.5 * (shift(p, 1, 0) - shift(p, -1, 0))


def _dx_adjoint(g: Plane) -> Plane:
    return 0.5 * (shift_adjoint(g, 0, 1) - shift_adjoint(g, 0, -1))


def _dy_adjoint(g: Plane) -> Plane:
    return 0.5 * (shift_adjoint(g, 1, 0) - shift_adjoint(g, -1, 0))


def derivatives(p: Plane) -> Derivatives:
    """Compute central-difference derivatives with unit pixel spacing.

    ``fx`` and ``fxx`` run along columns (x), ``fy`` and ``fyy`` along rows (y),
    and ``fxy`` is the central difference in y of ``fx``.

    :param p: A plane of at least 3×3 pixels
    :returns: The five derivative planes
    :raises ImageTooSmallError: if the plane is smaller than 3×3
    """
    p = _check_size(p)
    fx = _dx(p)
    fy = _dy(p)
    fxx = shift(p, 0, 1) - 2.0 * p + shift(p, 0, -1)
    fyy = shift(p, 1, 0) - 2.0 * p + shift(p, -1, 0)
    fxy = _dy(fx)
    return Derivatives(fx=fx, fy=fy, fxx=fxx, fyy=fyy, fxy=fxy)


def derivatives_adjoint(grads: Derivatives) -> Plane:
    """Map gradients with respect to the five derivative planes back onto the source plane."""
    rv = _dx_adjoint(grads.fx) + _dy_adjoint(grads.fy)
    rv += shift_adjoint(grads.fxx, 0, 1) - 2.0 * grads.fxx + shift_adjoint(grads.fxx, 0, -1)
    rv += shift_adjoint(grads.fyy, 1, 0) - 2.0 * grads.fyy + shift_adjoint(grads.fyy, -1, 0)
    rv += _dx_adjoint(_dy_adjoint(grads.fxy))
    return rv
