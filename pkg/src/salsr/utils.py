# -*- coding: utf-8 -*-

"""Utilities shared across :mod:`salsr`: paths, version stamps, and the error hierarchy."""

import os
from pathlib import Path
from subprocess import CalledProcessError, check_output  # noqa: S404
from typing import ClassVar, Optional, Sequence, Tuple

import pystow

__all__ = [
    "HERE",
    "RESOURCE_PATH",
    "get_git_hash",
    "get_version",
    "get_runs_directory",
    "SalsrError",
    "ConfigError",
    "StageCountError",
    "InsufficientDataError",
    "ProbabilityRangeError",
    "ImageIOError",
    "UnreadableImageError",
    "UnsupportedImageFormatError",
    "CorruptImageError",
    "CheckpointFormatError",
    "RawMapFormatError",
    "ShapeError",
    "DimensionMismatchError",
    "ImageTooSmallError",
    "SampleValueError",
    "NoForwardCacheError",
    "DivergenceError",
]

HERE = Path(__file__).parent.resolve()
RESOURCE_PATH = HERE.joinpath("resources")


def get_git_hash() -> Optional[str]:
    """Get the git hash.

    :return:
        The first six characters of the git hash, or None if the code is not
        running from a git checkout.
    """
    rv = _git("rev-parse", "HEAD")
    if not rv:
        return None
    return rv[:6]


def _git(*args: str) -> Optional[str]:
    with open(os.devnull, "w") as devnull:
        try:
            ret = check_output(  # noqa: S603,S607
                ["git", *args],
                cwd=os.path.dirname(__file__),
                stderr=devnull,
            )
        except (CalledProcessError, FileNotFoundError):
            return None
        else:
            return ret.strip().decode("utf-8")


def get_version() -> str:
    """Get the installed version of :mod:`salsr`."""
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("salsr")
    except PackageNotFoundError:
        return "unknown"


def get_runs_directory(*parts: str) -> Path:
    """Get (and create) a directory for run outputs under the salsr pystow home."""
    return pystow.join("salsr", "runs", *parts)


class SalsrError(Exception):
    """Base class for all errors raised by :mod:`salsr`."""

    #: The process exit code used by the CLI when this error escapes a command
    exit_code: ClassVar[int] = 1


class ConfigError(SalsrError, ValueError):
    """Raised for invalid configuration values or parameters."""

    exit_code = 2


class StageCountError(ConfigError):
    """Raised when the number of cascade stages does not match the scale factor."""

    def __init__(self, scale: int, expected: int, got: int):
        """Initialize the error.

        :param scale: The requested scale factor
        :param expected: The number of x2 stages needed for the scale
        :param got: The number of stages supplied
        """
        self.scale = scale
        self.expected = expected
        self.got = got

    def __str__(self) -> str:  # noqa:D105
        return (
            f"scale factor {self.scale} needs {self.expected} x2 stages, "
            f"but {self.got} were given"
        )


class InsufficientDataError(ConfigError):
    """Raised when a statistical test gets too few usable observations."""

    def __init__(self, needed: int, got: int):
        """Initialize the error.

        :param needed: The minimum number of non-zero differences
        :param got: The number of non-zero differences available
        """
        self.needed = needed
        self.got = got

    def __str__(self) -> str:  # noqa:D105
        return f"too few non-zero differences: need at least {self.needed}, got {self.got}"


class ProbabilityRangeError(ConfigError):
    """Raised when a discriminator output lies outside of the open interval (0, 1)."""

    def __init__(self, values):
        """Initialize the error.

        :param values: The offending probabilities
        """
        self.values = list(values)

    def __str__(self) -> str:  # noqa:D105
        return f"probabilities must lie strictly inside (0, 1), got {self.values[:5]}"


class ImageIOError(SalsrError, OSError):
    """Base class for file reading and writing errors."""

    exit_code = 3


class UnreadableImageError(ImageIOError):
    """Raised when an image file does not exist or can not be opened."""

    def __init__(self, path, reason: str = "file does not exist"):
        """Initialize the error.

        :param path: The offending path
        :param reason: Why the file could not be read
        """
        self.path = Path(path)
        self.reason = reason

    def __str__(self) -> str:  # noqa:D105
        return f"could not read {self.path}: {self.reason}"


class UnsupportedImageFormatError(ImageIOError):
    """Raised for image formats other than 8/16-bit PNG and binary PPM/PGM."""

    def __init__(self, path, detected: Optional[str] = None):
        """Initialize the error.

        :param path: The offending path
        :param detected: A description of what was found instead
        """
        self.path = Path(path)
        self.detected = detected

    def __str__(self) -> str:  # noqa:D105
        detail = f" (found {self.detected})" if self.detected else ""
        return f"unsupported image format for {self.path}{detail}; use PNG, PPM or PGM"


class CorruptImageError(ImageIOError):
    """Raised when an image has a recognized signature but can not be decoded."""

    def __init__(self, path, reason: str):
        """Initialize the error.

        :param path: The offending path
        :param reason: The decoder's complaint
        """
        self.path = Path(path)
        self.reason = reason

    def __str__(self) -> str:  # noqa:D105
        return f"corrupt image {self.path}: {self.reason}"


class CheckpointFormatError(ImageIOError):
    """Raised when a parameter checkpoint is malformed or does not match a network."""


class RawMapFormatError(ImageIOError):
    """Raised when a raw float map file is malformed."""


class ShapeError(SalsrError, ValueError):
    """Raised for incompatible array shapes."""

    exit_code = 4


class DimensionMismatchError(ShapeError):
    """Raised when two images that must agree in size do not."""

    def __init__(self, shapes: Sequence[Tuple[int, ...]]):
        """Initialize the error.

        :param shapes: The disagreeing shapes
        """
        self.shapes = list(shapes)

    def __str__(self) -> str:  # noqa:D105
        return "dimension mismatch: " + " vs ".join(str(tuple(s)) for s in self.shapes)


class ImageTooSmallError(ShapeError):
    """Raised when an image is smaller than an operation's minimum size."""

    def __init__(self, shape: Tuple[int, ...], minimum: Tuple[int, int], operation: str):
        """Initialize the error.

        :param shape: The shape of the offending image
        :param minimum: The minimum (height, width)
        :param operation: The name of the operation
        """
        self.shape = tuple(shape)
        self.minimum = minimum
        self.operation = operation

    def __str__(self) -> str:  # noqa:D105
        h, w = self.minimum
        return f"{self.operation} needs at least {h}x{w} pixels, got shape {self.shape}"


class SampleValueError(ShapeError):
    """Raised when pixel samples are non-finite or lie outside of their range."""


class NoForwardCacheError(ShapeError):
    """Raised when ``backward`` is called without a preceding train-mode ``forward``."""

    def __str__(self) -> str:  # noqa:D105
        return "backward() needs a preceding forward() in train mode"


class DivergenceError(SalsrError, RuntimeError):
    """Raised when a training loss becomes non-finite."""

    exit_code = 5

    def __init__(self, iteration: int, terms):
        """Initialize the error.

        :param iteration: The iteration at which the loss diverged
        :param terms: A mapping of loss term names to values at that iteration
        """
        self.iteration = iteration
        self.terms = dict(terms)

    def __str__(self) -> str:  # noqa:D105
        terms = ", ".join(f"{k}={v!r}" for k, v in self.terms.items())
        return f"training diverged at iteration {self.iteration}: {terms}"
