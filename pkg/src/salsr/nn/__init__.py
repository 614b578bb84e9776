# -*- coding: utf-8 -*-

"""A minimal neural network substrate with explicit gradients, Adam, and checkpoints."""

from .checkpoint import (  # noqa:F401
    Checkpoint,
    load_checkpoint,
    network_from_checkpoint,
    read_checkpoint,
    save_checkpoint,
)
from .layers import (  # noqa:F401
    BatchNorm2d,
    Conv2d,
    Dense,
    LeakyReLU,
    Parameter,
    PixelShuffle,
    ReLU,
    ResidualBlock,
    Sequential,
    Sigmoid,
    Skip,
    inverse_pixel_shuffle,
    pixel_shuffle,
)
from .network import Network, backward, forward, init_params  # noqa:F401
from .optim import Adam, AdamState, adam_step  # noqa:F401
