# -*- coding: utf-8 -*-

"""The generator, the discriminator, and feature extractors for the content loss."""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Protocol, Tuple, Union

import numpy as np

from ..nn import (
    BatchNorm2d,
    Conv2d,
    Dense,
    LeakyReLU,
    Network,
    PixelShuffle,
    ReLU,
    ResidualBlock,
    Sigmoid,
    Skip,
    init_params,
)
from ..utils import ConfigError, ImageTooSmallError

__all__ = [
    "GeneratorSpec",
    "DiscriminatorSpec",
    "build_generator",
    "build_discriminator",
    "generator_parameter_count",
    "discriminator_feature_size",
    "FeatureExtractor",
    "NetworkFeatureExtractor",
    "IdentityFeatureExtractor",
    "default_feature_extractor",
    "spec_to_dict",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GeneratorSpec:
    """The architecture of a ×2 generator stage."""

    n_residual_blocks: int = 4
    base_channels: int = 64
    kernel: int = 3
    #: Image channels: 1 for gray, 3 for color
    channels: int = 1
    upscale_per_stage: int = 2

    def __post_init__(self):
        if self.n_residual_blocks < 1:
            raise ConfigError(f"need at least one residual block, got {self.n_residual_blocks}")
        if self.base_channels < 1:
            raise ConfigError(f"base_channels must be positive, got {self.base_channels}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigError(f"kernel must be odd and positive, got {self.kernel}")
        if self.channels not in (1, 3):
            raise ConfigError(f"channels must be 1 or 3, got {self.channels}")
        if self.upscale_per_stage != 2:
            raise ConfigError("every generator stage upscales by exactly 2")


@dataclass(frozen=True)
class DiscriminatorSpec:
    """The architecture of the discriminator.

    The eight convolutions have ``base_channels * 2 ** (i // 2)`` feature maps
    for ``i = 0..7`` and stride 2 on the second of each pair.
    """

    base_channels: int = 64
    n_conv_layers: int = 8
    leaky_slope: float = 0.2
    dense_width: int = 1024
    kernel: int = 3
    channels: int = 1

    def __post_init__(self):
        if self.base_channels < 1:
            raise ConfigError(f"base_channels must be positive, got {self.base_channels}")
        if self.n_conv_layers != 8:
            raise ConfigError("the discriminator has exactly eight convolutions")
        if not 0.0 <= self.leaky_slope < 1.0:
            raise ConfigError(f"leaky_slope must lie in [0, 1), got {self.leaky_slope}")
        if self.dense_width < 1:
            raise ConfigError(f"dense_width must be positive, got {self.dense_width}")
        if self.channels not in (1, 3):
            raise ConfigError(f"channels must be 1 or 3, got {self.channels}")

    def conv_channels(self) -> Tuple[int, ...]:
        """Get the number of feature maps of each convolution."""
        return tuple(self.base_channels * 2 ** (i // 2) for i in range(self.n_conv_layers))

    def conv_strides(self) -> Tuple[int, ...]:
        """Get the stride of each convolution."""
        return tuple(2 if i % 2 else 1 for i in range(self.n_conv_layers))


def build_generator(spec: GeneratorSpec) -> Network:
    """Build an uninitialized ×2 generator.

    The layout is an entry convolution with ReLU, residual blocks and a
    convolution with batch normalization under a long skip from the entry,
    a sub-pixel ×2 upscaling head, and an output convolution.
    """
    c, f, k = spec.channels, spec.base_channels, spec.kernel
    return Network(
        [
            Conv2d(c, f, k),
            ReLU(),
            Skip(
                [
                    *(ResidualBlock(f, k) for _ in range(spec.n_residual_blocks)),
                    Conv2d(f, f, k),
                    BatchNorm2d(f),
                ]
            ),
            Conv2d(f, 4 * f, k),
            PixelShuffle(2),
            ReLU(),
            Conv2d(f, c, k),
        ]
    )


def generator_parameter_count(spec: GeneratorSpec) -> int:
    """Count the trainable scalars of a generator in closed form."""
    c, f, k2, n = spec.channels, spec.base_channels, spec.kernel**2, spec.n_residual_blocks
    return 2 * c * f * k2 + 5 * f * f * k2 + 8 * f + c + n * (2 * f * f * k2 + 6 * f)


def _input_size(input_size: Union[int, Tuple[int, int]]) -> Tuple[int, int]:
    if isinstance(input_size, int):
        return input_size, input_size
    height, width = input_size
    return int(height), int(width)


def discriminator_feature_size(spec: DiscriminatorSpec, input_size) -> int:
    """Get the number of inputs to the first dense layer for an input size."""
    height, width = _input_size(input_size)
    for stride in spec.conv_strides():
        height = math.ceil(height / stride)
        width = math.ceil(width / stride)
    return spec.conv_channels()[-1] * height * width


def build_discriminator(spec: DiscriminatorSpec, input_size: Union[int, Tuple[int, int]]) -> Network:
    """Build an uninitialized discriminator for images of a fixed size.

    :param spec: The architecture
    :param input_size: The side length, or (height, width), of the images it judges
    :returns: A network mapping (n, c, h, w) to probabilities of shape (n, 1, 1, 1)
    :raises ImageTooSmallError: if the images are smaller than 16×16
    """
    height, width = _input_size(input_size)
    if height < 16 or width < 16:
        raise ImageTooSmallError((height, width), (16, 16), "discriminator")
    layers = []
    in_channels = spec.channels
    for i, (out_channels, stride) in enumerate(zip(spec.conv_channels(), spec.conv_strides())):
        layers.append(Conv2d(in_channels, out_channels, spec.kernel, stride=stride))
        if i:
            layers.append(BatchNorm2d(out_channels))
        layers.append(LeakyReLU(spec.leaky_slope))
        in_channels = out_channels
    layers.extend(
        [
            Dense(discriminator_feature_size(spec, (height, width)), spec.dense_width),
            LeakyReLU(spec.leaky_slope),
            Dense(spec.dense_width, 1),
            Sigmoid(),
        ]
    )
    return Network(layers)


class FeatureExtractor(Protocol):
    """Maps image batches to feature batches and backpropagates through that mapping."""

    #: A name recorded in run configurations
    identifier: str

    def features(self, x: np.ndarray, track: bool = False) -> np.ndarray:
        """Compute features of a (n, c, h, w) batch, caching for :meth:`backward` if ``track``."""

    def backward(self, g: np.ndarray) -> np.ndarray:
        """Map a gradient on the last tracked features back onto the images."""


class NetworkFeatureExtractor:
    """Features from a frozen network."""

    def __init__(self, network: Network, identifier: str):
        """Initialize the extractor.

        :param network: The network, which is frozen in place
        :param identifier: A name recorded in run configurations
        """
        network.frozen = True
        self.network = network
        self.identifier = identifier

    def features(self, x: np.ndarray, track: bool = False) -> np.ndarray:  # noqa:D102
        return self.network.forward(x, mode="train" if track else "infer")

    def backward(self, g: np.ndarray) -> np.ndarray:  # noqa:D102
        return self.network.backward(g)


class IdentityFeatureExtractor:
    """Uses the pixels themselves as features."""

    identifier = "identity"

    def features(self, x: np.ndarray, track: bool = False) -> np.ndarray:  # noqa:D102
        return np.asarray(x, dtype=np.float64)

    def backward(self, g: np.ndarray) -> np.ndarray:  # noqa:D102
        return g


def default_feature_extractor(channels: int = 1, seed: int = 0) -> NetworkFeatureExtractor:
    """Get the built-in feature extractor.

    It is a frozen stack of four 3×3 convolutions with 16, 16, 32 and 32 feature
    maps, each followed by ReLU, where the second and fourth have stride 2. The
    weights are He-uniform draws from ``seed`` in double precision.
    """
    network = Network(
        [
            Conv2d(channels, 16),
            ReLU(),
            Conv2d(16, 16, stride=2),
            ReLU(),
            Conv2d(16, 32),
            ReLU(),
            Conv2d(32, 32, stride=2),
            ReLU(),
        ],
        dtype=np.float64,
    )
    init_params(network, seed)
    return NetworkFeatureExtractor(network, identifier=f"conv4-seed{seed}")


def spec_to_dict(spec) -> dict:
    """Serialize a generator or discriminator spec for checkpoint metadata."""
    return {"type": type(spec).__name__, **asdict(spec)}
