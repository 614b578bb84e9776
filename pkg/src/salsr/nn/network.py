# -*- coding: utf-8 -*-

"""Networks: top-level layer chains with a mode, a floating point type, and initialization."""

import logging
from typing import Dict, Iterable, Iterator, Literal, Optional, Tuple

import numpy as np

from .layers import Layer, LayerTable, Parameter, Sequential, build_layer
from ..utils import ConfigError, NoForwardCacheError, ShapeError

__all__ = [
    "Mode",
    "Network",
    "forward",
    "backward",
    "init_params",
]

logger = logging.getLogger(__name__)

Mode = Literal["train", "infer"]


class Network(Sequential):
    """A chain of layers that owns its parameters and forward cache.

    In ``train`` mode batch normalization uses batch statistics and every layer
    caches what :meth:`backward` needs. In ``infer`` mode batch normalization
    uses the running statistics and forward passes are pure.
    """

    kind = "network"

    def __init__(
        self,
        layers: Iterable[Layer] = (),
        *,
        mode: Mode = "train",
        dtype=np.float32,
        frozen: bool = False,
    ):
        """Initialize the network.

        :param layers: The layers, first to last
        :param mode: The default mode of :meth:`forward`
        :param dtype: The floating point type of parameters and activations
        :param frozen: If true, backward passes only compute input gradients,
            training-mode forward passes keep the running statistics, and
            optimizers leave the parameters alone
        """
        super().__init__(layers)
        self.mode = _check_mode(mode)
        self.dtype = np.dtype(dtype)
        self.frozen = frozen
        self._output_shape: Optional[Tuple[int, ...]] = None

    @classmethod
    def from_layer_table(cls, table: LayerTable, **kwargs) -> "Network":
        """Rebuild an (uninitialized) network from a layer table."""
        return cls([build_layer(kind, config) for kind, config in table], **kwargs)

    def named_parameters(
        self, prefix: str = "", *, trainable_only: bool = False
    ) -> Iterator[Tuple[str, Parameter]]:
        """Iterate over the parameters with dotted names like ``1.body.0.weight``."""
        for name, param in super().named_parameters(prefix):
            if param.trainable or not trainable_only:
                yield name, param

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Get a copy of every parameter's data by name."""
        return {name: param.data.copy() for name, param in self.named_parameters()}

    def zero_grad(self) -> None:
        """Reset every gradient buffer to zero."""
        for _, param in self.named_parameters():
            param.grad = np.zeros_like(param.data)

    def num_parameters(self) -> int:
        """Count the trainable scalars (weights, biases, scales and shifts)."""
        return sum(param.data.size for _, param in self.named_parameters(trainable_only=True))

    def forward(self, x: np.ndarray, mode: Optional[Mode] = None) -> np.ndarray:  # type:ignore
        """Run the network on a (n, c, h, w) batch.

        :param x: The input batch, converted to the network's floating point type
        :param mode: ``train`` or ``infer``, defaulting to the network's mode
        :returns: The output batch
        :raises ShapeError: if a layer rejects its input; the message names the layer index and kind
        """
        mode = _check_mode(mode or self.mode)
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 4:
            raise ShapeError(f"networks take (n, c, h, w) batches, got shape {x.shape}")
        train = mode == "train"
        self._output_shape = None
        buffers = []
        if train and self.frozen:
            buffers = [(param, param.data) for _, param in self.named_parameters() if not param.trainable]
        out = super().forward(x, train=train)
        for param, data in buffers:
            param.data = data
        if train:
            self._output_shape = out.shape
        return out

    def backward(self, g: np.ndarray) -> np.ndarray:  # type:ignore
        """Backpropagate a gradient through the last training-mode forward pass.

        Parameter gradients accumulate unless the network is frozen.

        :param g: The gradient with respect to the output
        :returns: The gradient with respect to the input
        :raises NoForwardCacheError: if no training-mode forward pass preceded the call
        :raises ShapeError: if the gradient does not match the output shape
        """
        if self._output_shape is None:
            raise NoForwardCacheError
        g = np.asarray(g, dtype=self.dtype)
        if g.shape != self._output_shape:
            raise ShapeError(f"gradient has shape {g.shape}, expected {self._output_shape}")
        return super().backward(g, param_grads=not self.frozen)

    def astype(self, dtype) -> "Network":
        """Convert every parameter to another floating point type, in place."""
        self.dtype = np.dtype(dtype)
        for _, param in self.named_parameters():
            param.assign(param.data.astype(self.dtype))
        return self


def _check_mode(mode: str) -> str:
    if mode not in ("train", "infer"):
        raise ConfigError(f"mode must be train or infer, got {mode!r}")
    return mode


def forward(net: Network, x: np.ndarray, mode: Mode = "train") -> np.ndarray:
    """Run a network; see :meth:`Network.forward`."""
    return net.forward(x, mode=mode)


def backward(net: Network, upstream_grad: np.ndarray) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """Backpropagate through a network from freshly zeroed gradient buffers.

    :returns: A pair of the parameter gradients by name and the input gradient
    """
    net.zero_grad()
    dx = net.backward(upstream_grad)
    grads = {name: param.grad.copy() for name, param in net.named_parameters(trainable_only=True)}
    return grads, dx


def init_params(net: Network, seed: int, dtype=None) -> Network:
    """Initialize a network's parameters deterministically, in place.

    Convolution and dense weights are drawn He-uniformly from
    ``[-sqrt(6 / fan_in), sqrt(6 / fan_in)]``, biases are zero, and batch
    normalization starts with unit scale, zero shift and unit running variance.

    :param net: The network
    :param seed: The seed of the random number generator
    :param dtype: The floating point type, defaulting to the network's
    :returns: The same network
    """
    if dtype is not None:
        net.dtype = np.dtype(dtype)
    rng = np.random.default_rng(seed)
    net.reset_parameters(rng, net.dtype)
    logger.debug(
        "initialized %d trainable parameters in %d layers with seed %d",
        net.num_parameters(),
        len(net),
        seed,
    )
    return net
