# -*- coding: utf-8 -*-

"""Aligned (LR, HR) patch datasets: synthetic, from image directories, and augmented."""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage
from tqdm.auto import tqdm

from ..degrade import make_lr
from ..imgcore import load_image, select_channel
from ..saliency import SaliencyConfig, saliency_map
from ..utils import ConfigError, ImageIOError, ShapeError
from .losses import luma

__all__ = [
    "IMAGE_SUFFIXES",
    "PairDataset",
    "synthetic_patches",
    "augment_pairs",
    "load_directory",
]

logger = logging.getLogger(__name__)

#: Suffixes of the image files picked up from dataset directories
IMAGE_SUFFIXES = (".png", ".ppm", ".pgm")

#: Tint of the synthetic color patches, from red to blue
FUNDUS_TINT = (0.95, 0.55, 0.3)


class PairDataset:
    """HR patches of one size with their LR partners made by :func:`salsr.degrade.make_lr`.

    The saliency map of each HR patch's luma plane is computed on first use
    and cached, since it is reused by every training step that draws it.
    """

    def __init__(
        self,
        hr: np.ndarray,
        scale: int = 2,
        saliency: Optional[SaliencyConfig] = None,
        lr: Optional[np.ndarray] = None,
    ):
        """Initialize the dataset.

        :param hr: The HR patches, shaped (n, c, h, w) with values in [0, 1]
        :param scale: The scale factor between the LR and the HR patches
        :param saliency: The parameters of the cached saliency maps
        :param lr: The LR patches, synthesized from ``hr`` when not given
        :raises ConfigError: if there are no patches
        :raises ShapeError: if the patches are not a (n, c, h, w) array, or the
            LR patches are not ``scale`` times smaller than the HR patches
        """
        hr = np.asarray(hr, dtype=np.float64)
        if hr.ndim != 4:
            raise ShapeError(f"HR patches must be shaped (n, c, h, w), got {hr.shape}")
        if hr.shape[0] == 0:
            raise ConfigError("the dataset has no patches")
        if hr.shape[1] not in (1, 3):
            raise ShapeError(f"patches need 1 or 3 channels, got {hr.shape[1]}")
        if lr is None:
            lr = np.stack([np.stack([make_lr(plane, scale) for plane in patch]) for patch in hr])
        lr = np.asarray(lr, dtype=np.float64)
        n, c, height, width = hr.shape
        if lr.shape != (n, c, height // scale, width // scale) or height % scale or width % scale:
            raise ShapeError(f"LR patches {lr.shape} do not match HR patches {hr.shape} at scale {scale}")
        self.hr = hr
        self.lr = lr
        self.scale = scale
        self.saliency_config = saliency or SaliencyConfig()
        self._saliency: Dict[int, np.ndarray] = {}

    def __len__(self) -> int:  # noqa:D105
        return self.hr.shape[0]

    def __repr__(self) -> str:  # noqa:D105
        return f"PairDataset(n={len(self)}, channels={self.channels}, hr_size={self.hr_size}, scale={self.scale})"

    @property
    def channels(self) -> int:
        """The number of image channels."""
        return self.hr.shape[1]

    @property
    def hr_size(self) -> Tuple[int, int]:
        """The (height, width) of the HR patches."""
        return self.hr.shape[2], self.hr.shape[3]

    def saliency(self, index: int) -> np.ndarray:
        """Get the saliency map of an HR patch's luma plane."""
        index = int(index)
        if index not in self._saliency:
            self._saliency[index] = saliency_map(luma(self.hr[index]), self.saliency_config)
        return self._saliency[index]

    def batch(self, indices: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
        """Get the (LR, HR) batches for some patch indices."""
        indices = np.asarray(indices, dtype=np.int64)
        return self.lr[indices], self.hr[indices]

    def saliency_batch(self, indices: Sequence[int]) -> np.ndarray:
        """Get the (n, h, w) saliency maps for some patch indices."""
        return np.stack([self.saliency(i) for i in indices])

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw a batch of patch indices, without replacement when the dataset is large enough."""
        return rng.choice(len(self), size=size, replace=len(self) < size)

    def split(self, n_holdout: int) -> Tuple["PairDataset", "PairDataset"]:
        """Split off the last ``n_holdout`` patches as a held-out set."""
        if not 0 < n_holdout < len(self):
            raise ConfigError(f"cannot hold out {n_holdout} of {len(self)} patches")
        cut = len(self) - n_holdout
        return self.subset(range(cut)), self.subset(range(cut, len(self)))

    def subset(self, indices: Sequence[int]) -> "PairDataset":
        """Get a dataset with some of the patches."""
        indices = np.asarray(list(indices), dtype=np.int64)
        return PairDataset(self.hr[indices], self.scale, self.saliency_config, lr=self.lr[indices])


def _ridge(size: int, rng: np.random.Generator) -> np.ndarray:
    """Get the distance of every pixel to a random sinuous curve crossing the patch."""
    t = np.linspace(-0.2, 1.2, 8 * size)
    angle = rng.uniform(0, np.pi)
    direction = np.array([np.cos(angle), np.sin(angle)])
    normal = np.array([-direction[1], direction[0]])
    start = rng.uniform(0.2, 0.8, size=2) * size - 0.5 * size * direction
    amplitude = rng.uniform(0.5, 3.0)
    frequency = rng.uniform(1.0, 4.0)
    phase = rng.uniform(0, 2 * np.pi)
    offsets = amplitude * np.sin(2 * np.pi * frequency * t + phase)
    points = start + np.outer(t * size, direction) + np.outer(offsets, normal)
    yy, xx = np.mgrid[0:size, 0:size]
    grid = np.stack([yy.ravel(), xx.ravel()], axis=1).astype(np.float64)
    distances = np.sqrt(((grid[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)).min(axis=1)
    return distances.reshape(size, size)


def _synthetic_patch(size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cy, cx = rng.uniform(-0.5, 1.5, size=2) * size
    radius = np.hypot(yy - cy, xx - cx) / (size * np.sqrt(2))
    rv = 0.45 + 0.3 * np.clip(1.0 - radius, 0.0, 1.0)
    rv += 0.03 * ndimage.gaussian_filter(rng.standard_normal((size, size)), 1.5, mode="wrap")
    for _ in range(rng.integers(2, 5)):
        width = rng.uniform(0.6, 1.8)
        depth = rng.uniform(0.15, 0.35)
        rv -= depth * np.exp(-(_ridge(size, rng) ** 2) / (2 * width**2))
    return np.clip(rv, 0.0, 1.0)


def synthetic_patches(n: int, size: int = 32, seed: int = 0, channels: int = 1) -> np.ndarray:
    """Render retina-like HR patches with thin dark curved vessels over a smooth background.

    :param n: The number of patches
    :param size: The side length of the patches
    :param seed: The seed of the random number generator
    :param channels: 1 for gray patches, 3 for orange-tinted color patches
    :returns: An array of shape (n, channels, size, size) with values in [0, 1]
    """
    if n < 1 or size < 8:
        raise ConfigError(f"need at least one patch of side >= 8, got n={n}, size={size}")
    if channels not in (1, 3):
        raise ConfigError(f"channels must be 1 or 3, got {channels}")
    rng = np.random.default_rng(seed)
    gray = np.stack([_synthetic_patch(size, rng) for _ in range(n)])[:, None]
    if channels == 1:
        return gray
    return np.clip(gray * np.asarray(FUNDUS_TINT)[None, :, None, None] + 0.05, 0.0, 1.0)


def _augment(patch: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    rv = np.rot90(patch, k=int(rng.integers(4)), axes=(1, 2))
    if rng.integers(2):
        rv = rv[:, :, ::-1]
    dy, dx = rng.integers(patch.shape[1]), rng.integers(patch.shape[2])
    return np.ascontiguousarray(np.roll(rv, (int(dy), int(dx)), axis=(1, 2)))


def augment_pairs(dataset: PairDataset, copies: int, seed: int = 0) -> PairDataset:
    """Extend a dataset with transformed copies of each HR patch.

    Each copy is a random right-angle rotation, an optional horizontal flip and
    a circular translation of the original. The LR partners of the copies are
    synthesized again so the pairs stay aligned.

    :param dataset: The original pairs, whose patches must be square
    :param copies: The number of copies per patch; zero returns the dataset itself
    :param seed: The seed of the random number generator
    :returns: The original patches followed by their copies
    """
    if copies < 0:
        raise ConfigError(f"copies must be non-negative, got {copies}")
    if copies == 0:
        return dataset
    height, width = dataset.hr_size
    if height != width:
        raise ShapeError(f"only square patches can be rotated, got {height}x{width}")
    rng = np.random.default_rng(seed)
    augmented = [_augment(patch, rng) for patch in dataset.hr for _ in range(copies)]
    return PairDataset(
        np.concatenate([dataset.hr, np.stack(augmented)]),
        scale=dataset.scale,
        saliency=dataset.saliency_config,
    )


def _tiles(array: np.ndarray, patch_size: int) -> List[np.ndarray]:
    _, height, width = array.shape
    return [
        array[:, top : top + patch_size, left : left + patch_size]
        for top in range(0, height - patch_size + 1, patch_size)
        for left in range(0, width - patch_size + 1, patch_size)
    ]


def load_directory(
    directory: Union[str, Path],
    patch_size: int = 32,
    scale: int = 2,
    channel: str = "luma",
    saliency: Optional[SaliencyConfig] = None,
    progress: bool = False,
) -> PairDataset:
    """Tile every image of a directory into non-overlapping HR patches.

    :param directory: The directory, searched non-recursively for PNG, PPM and PGM files
    :param patch_size: The side length of the HR patches
    :param scale: The scale factor of the LR partners
    :param channel: ``rgb`` to keep the color channels, or a channel for
        :func:`salsr.imgcore.select_channel`
    :param saliency: The parameters of the cached saliency maps
    :param progress: Whether to show a progress bar
    :returns: The patches of all images, in file name order
    :raises ImageIOError: if the directory does not exist
    :raises ConfigError: if no patch could be cut
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ImageIOError(f"dataset directory {directory} does not exist")
    if patch_size % scale:
        raise ConfigError(f"patch size {patch_size} is not divisible by scale {scale}")
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    patches = []
    for path in tqdm(paths, desc="Tiling images", unit="image", disable=not progress):
        image = load_image(path)
        if channel == "rgb":
            array = image.as_array()
        else:
            array = select_channel(image, channel)[None]
        tiles = _tiles(array, patch_size)
        if not tiles:
            logger.warning("skipping %s: smaller than a %dx%d patch", path, patch_size, patch_size)
        patches.extend(tiles)
    if not patches:
        raise ConfigError(f"no {patch_size}x{patch_size} patches in {directory}")
    logger.info("cut %d patches from %d images in %s", len(patches), len(paths), directory)
    return PairDataset(np.stack(patches), scale=scale, saliency=saliency)
