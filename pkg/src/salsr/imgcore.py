# -*- coding: utf-8 -*-

"""Pixel containers, color conversion, normalization, and image file I/O.

A :data:`Plane` is a two-dimensional :class:`numpy.ndarray` of ``float64`` samples
indexed as ``plane[y, x]``. An :class:`RgbImage` bundles three planes of identical
shape with samples in [0, 1].
"""

import logging
import struct
from pathlib import Path
from typing import Literal, NamedTuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from .utils import (
    CorruptImageError,
    DimensionMismatchError,
    ImageIOError,
    RawMapFormatError,
    SampleValueError,
    ShapeError,
    UnreadableImageError,
    UnsupportedImageFormatError,
)

__all__ = [
    "Plane",
    "RgbImage",
    "Channel",
    "LUMA_WEIGHTS",
    "as_plane",
    "load_image",
    "save_image",
    "to_gray",
    "to_y_channel",
    "select_channel",
    "normalize_minmax",
    "save_plane",
    "write_raw_map",
    "read_raw_map",
    "heatmap",
]

logger = logging.getLogger(__name__)

#: A single-channel floating point image, indexed ``[y, x]``
Plane = np.ndarray

#: BT.601 luma weights shared by grayscale and Y-channel conversion
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

Channel = Literal["luma", "red", "green", "blue"]

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
PNM_SIGNATURES = {b"P5": "PGM", b"P6": "PPM"}
SUFFIX_FORMATS = {".png": "PNG", ".pgm": "PPM", ".ppm": "PPM", ".pnm": "PPM"}

RAW_MAGIC = b"SALSRMAP"
RAW_HEADER = struct.Struct("<8sII")

#: Color stops of the heatmap rendering, from cold (0) to warm (1)
HEATMAP_STOPS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
HEATMAP_COLORS = np.array(
    [
        [0.0, 0.0, 0.5],  # navy
        [0.0, 0.5, 1.0],  # azure
        [0.0, 0.8, 0.3],  # green
        [1.0, 0.85, 0.0],  # amber
        [0.8, 0.0, 0.0],  # red
    ]
)


def as_plane(data, *, name: str = "plane") -> Plane:
    """Validate and convert data into a plane.

    :param data: Anything :func:`numpy.asarray` accepts with two dimensions
    :param name: A name used in error messages
    :returns: A ``float64`` array with at least one pixel and only finite samples
    :raises ShapeError: if the data is not two dimensional or is empty
    :raises SampleValueError: if any sample is NaN or infinite
    """
    rv = np.asarray(data, dtype=np.float64)
    if rv.ndim != 2 or rv.shape[0] < 1 or rv.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2D array, got shape {rv.shape}")
    if not np.all(np.isfinite(rv)):
        raise SampleValueError(f"{name} contains non-finite samples")
    return rv


class RgbImage(NamedTuple):
    """A color image made of three planes with samples in [0, 1]."""

    red: Plane
    green: Plane
    blue: Plane

    @property
    def height(self) -> int:
        """Get the image height in pixels."""
        return self.red.shape[0]

    @property
    def width(self) -> int:
        """Get the image width in pixels."""
        return self.red.shape[1]

    @property
    def shape(self):
        """Get the (height, width) of the image."""
        return self.red.shape

    @classmethod
    def from_gray(cls, plane: Plane) -> "RgbImage":
        """Replicate a gray plane into three channels."""
        plane = as_plane(plane)
        return cls(plane, plane.copy(), plane.copy())

    @classmethod
    def from_array(cls, array: np.ndarray) -> "RgbImage":
        """Build an image from an array shaped (height, width, 3) or (3, height, width)."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 3 and array.shape[-1] == 3:
            array = np.moveaxis(array, -1, 0)
        if array.ndim != 3 or array.shape[0] != 3:
            raise ShapeError(f"expected a 3-channel array, got shape {array.shape}")
        return cls(*(as_plane(channel) for channel in array))

    def as_array(self) -> np.ndarray:
        """Stack the channels into a (3, height, width) array."""
        return np.stack([self.red, self.green, self.blue])

    def map(self, func) -> "RgbImage":
        """Apply a plane-to-plane function to every channel."""
        return RgbImage(func(self.red), func(self.green), func(self.blue))

    def validate(self) -> "RgbImage":
        """Check the channel invariants and return the image unchanged.

        :raises DimensionMismatchError: if the channels disagree in shape
        :raises SampleValueError: if a sample lies outside of [0, 1]
        """
        shapes = {channel.shape for channel in self}
        if len(shapes) != 1:
            raise DimensionMismatchError([channel.shape for channel in self])
        for channel in self:
            as_plane(channel)
            if channel.min() < 0.0 or channel.max() > 1.0:
                raise SampleValueError("RGB samples must lie in [0, 1]")
        return self


def _detect_format(path: Path) -> str:
    try:
        with path.open("rb") as file:
            head = file.read(8)
    except OSError as e:
        raise UnreadableImageError(path, str(e)) from e
    if head.startswith(PNG_SIGNATURE):
        return "PNG"
    if head[:2] in PNM_SIGNATURES:
        return PNM_SIGNATURES[head[:2]]
    if head[:2] in {b"P1", b"P2", b"P3", b"P4"}:
        raise UnsupportedImageFormatError(path, "ASCII or bitmap netpbm")
    if len(head) < 2:
        raise CorruptImageError(path, "file is empty or truncated before the header")
    raise UnsupportedImageFormatError(path)


def load_image(path: Union[str, Path]) -> RgbImage:
    """Load a PNG, PPM or PGM file as an RGB image with samples in [0, 1].

    Gray images are replicated into three channels. 16-bit samples are
    rescaled by 65535, 8-bit samples by 255. Alpha channels are dropped.

    :param path: The path to the image file
    :returns: The decoded image
    :raises UnreadableImageError: if the file is missing or can not be opened
    :raises UnsupportedImageFormatError: if the file is not PNG/PPM/PGM
    :raises CorruptImageError: if the header or pixel data can not be decoded
    """
    path = Path(path)
    if not path.is_file():
        raise UnreadableImageError(path)
    _detect_format(path)
    try:
        with Image.open(path) as image:
            image.load()
            array, depth = _image_to_array(image)
    except UnidentifiedImageError as e:
        raise CorruptImageError(path, "header could not be parsed") from e
    except (OSError, SyntaxError, ValueError) as e:
        raise CorruptImageError(path, str(e)) from e

    array = array.astype(np.float64) / depth
    if array.ndim == 2:
        return RgbImage.from_gray(array)
    return RgbImage.from_array(array[..., :3])


def _image_to_array(image: Image.Image):
    mode = image.mode
    if mode in {"I;16", "I;16B", "I;16L", "I"}:
        return np.asarray(image, dtype=np.float64), 65535.0
    if mode == "L":
        return np.asarray(image), 255.0
    if mode == "RGB":
        return np.asarray(image), 255.0
    if mode in {"1", "LA"}:
        return np.asarray(image.convert("L")), 255.0
    return np.asarray(image.convert("RGB")), 255.0


def _format_for(path: Path) -> str:
    fmt = SUFFIX_FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise UnsupportedImageFormatError(path, f"suffix {path.suffix!r}")
    return fmt


def _quantize(plane: Plane) -> np.ndarray:
    return np.round(np.clip(plane, 0.0, 1.0) * 255.0).astype(np.uint8)


def _write(image: Image.Image, path: Path) -> None:
    fmt = _format_for(path)
    if fmt == "PPM" and path.suffix.lower() == ".pgm" and image.mode != "L":
        image = image.convert("L")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        image.save(path, format=fmt)
    except OSError as e:
        raise ImageIOError(f"could not write {path}: {e}") from e


def save_image(img: RgbImage, path: Union[str, Path]) -> None:
    """Save an RGB image as an 8-bit PNG or PPM, chosen by the file suffix."""
    array = np.stack([_quantize(channel) for channel in img], axis=-1)
    _write(Image.fromarray(array, mode="RGB"), Path(path))


def to_gray(img: RgbImage) -> Plane:
    """Convert an RGB image to gray with the BT.601 luma weights.

    >>> import numpy as np
    >>> red = RgbImage(np.ones((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)))
    >>> float(to_gray(red)[0, 0])
    0.299
    """
    wr, wg, wb = LUMA_WEIGHTS
    return np.clip(wr * img.red + wg * img.green + wb * img.blue, 0.0, 1.0)


def to_y_channel(img: RgbImage) -> Plane:
    """Get the Y (luma) channel used for quality metrics; identical to :func:`to_gray`."""
    return to_gray(img)


def select_channel(img: RgbImage, channel: Channel = "luma") -> Plane:
    """Pick the plane that feeds saliency or evaluation.

    :param img: The color image
    :param channel: One of ``luma`` (default), ``red``, ``green`` or ``blue``
    :returns: The selected plane
    """
    if channel == "luma":
        return to_gray(img)
    try:
        return getattr(img, channel)
    except AttributeError:
        raise ValueError(f"unknown channel: {channel}") from None


def normalize_minmax(p: Plane) -> Plane:
    """Affinely map a plane onto [0, 1]; constant planes map to all zeros."""
    p = np.asarray(p, dtype=np.float64)
    low, high = p.min(), p.max()
    if high - low <= 0.0:
        return np.zeros_like(p)
    return (p - low) / (high - low)


def heatmap(p: Plane) -> np.ndarray:
    """Render a plane in [0, 1] as an (height, width, 3) color array.

    The colormap interpolates linearly between five fixed stops: navy (0),
    azure (0.25), green (0.5), amber (0.75) and red (1), so warmer colours
    indicate higher values.
    """
    p = np.clip(p, 0.0, 1.0)
    return np.stack(
        [np.interp(p, HEATMAP_STOPS, HEATMAP_COLORS[:, i]) for i in range(3)],
        axis=-1,
    )


def save_plane(
    p: Plane,
    path: Union[str, Path],
    mode: Literal["grayscale", "heatmap"] = "grayscale",
) -> None:
    """Save a plane as an 8-bit image after clamping it to [0, 1].

    :param p: The plane to save
    :param path: The output path; ``.png``, ``.pgm`` or ``.ppm``
    :param mode: ``grayscale`` writes one channel; ``heatmap`` applies :func:`heatmap`
    :raises ImageIOError: if the file can not be written
    """
    path = Path(path)
    if mode == "grayscale":
        image = Image.fromarray(_quantize(p), mode="L")
    elif mode == "heatmap":
        colors = heatmap(p)
        array = np.stack([_quantize(colors[..., i]) for i in range(3)], axis=-1)
        image = Image.fromarray(array, mode="RGB")
    else:
        raise ValueError(f"unknown mode: {mode}")
    _write(image, path)


def write_raw_map(p: Plane, path: Union[str, Path]) -> None:
    """Write a plane as a raw float map.

    The format is a 16-byte header (the magic ``SALSRMAP``, then width and
    height as little-endian unsigned 32-bit integers) followed by
    ``width * height`` little-endian 32-bit floats in row-major order.
    """
    p = np.asarray(p)
    if p.ndim != 2:
        raise ShapeError(f"raw maps hold 2D planes, got shape {p.shape}")
    height, width = p.shape
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as file:
        file.write(RAW_HEADER.pack(RAW_MAGIC, width, height))
        file.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def read_raw_map(path: Union[str, Path]) -> Plane:
    """Read a raw float map written by :func:`write_raw_map`.

    :raises UnreadableImageError: if the file does not exist
    :raises RawMapFormatError: if the magic, dimensions or payload size are wrong
    """
    path = Path(path)
    if not path.is_file():
        raise UnreadableImageError(path)
    payload = path.read_bytes()
    if len(payload) < RAW_HEADER.size:
        raise RawMapFormatError(f"{path} is too short to hold a raw map header")
    magic, width, height = RAW_HEADER.unpack_from(payload)
    if magic != RAW_MAGIC:
        raise RawMapFormatError(f"{path} does not start with {RAW_MAGIC!r}")
    expected = RAW_HEADER.size + 4 * width * height
    if len(payload) != expected or width < 1 or height < 1:
        raise RawMapFormatError(
            f"{path} declares {width}x{height} but holds {len(payload) - RAW_HEADER.size} bytes"
        )
    data = np.frombuffer(payload, dtype="<f4", offset=RAW_HEADER.size)
    return data.reshape(height, width).astype(np.float64)
