# -*- coding: utf-8 -*-

"""Layers with explicit forward and backward passes over (n, c, h, w) arrays.

Each layer caches what its backward pass needs only when its forward pass runs
in training mode. Parameter gradients accumulate into :attr:`Parameter.grad`
until they are reset with :meth:`salsr.nn.network.Network.zero_grad`.
"""

import logging
from typing import Any, ClassVar, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Type

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..utils import ConfigError, NoForwardCacheError, ShapeError

__all__ = [
    "Parameter",
    "Layer",
    "Conv2d",
    "BatchNorm2d",
    "ReLU",
    "LeakyReLU",
    "Sigmoid",
    "Dense",
    "PixelShuffle",
    "Sequential",
    "Skip",
    "ResidualBlock",
    "LAYER_KINDS",
    "build_layer",
    "pixel_shuffle",
    "inverse_pixel_shuffle",
]

logger = logging.getLogger(__name__)

LayerTable = List[Tuple[str, Dict[str, Any]]]


class Parameter:
    """A tensor of network state with its gradient buffer."""

    def __init__(self, data: np.ndarray, trainable: bool = True):
        """Initialize the parameter.

        :param data: The initial values
        :param trainable: Whether optimizers update it; batch-norm running statistics are not trainable
        """
        self.data = np.asarray(data)
        self.grad = np.zeros_like(self.data)
        self.trainable = trainable

    @property
    def shape(self) -> Tuple[int, ...]:
        """Get the shape of the parameter."""
        return self.data.shape

    def assign(self, data: np.ndarray) -> None:
        """Replace the values, resetting the gradient to match their shape and type."""
        self.data = np.asarray(data)
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:  # noqa:D105
        return f"Parameter(shape={self.shape}, dtype={self.data.dtype}, trainable={self.trainable})"


def _check_4d(x: np.ndarray, kind: str) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{kind} expects a (n, c, h, w) array, got shape {x.shape}")


class Layer:
    """The base class for layers."""

    #: The name used in layer tables and error messages
    kind: ClassVar[str]

    def __init__(self):
        """Initialize the layer without parameters."""
        self.params: Dict[str, Parameter] = {}
        self._cache: Any = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """Compute the layer output, caching intermediates when ``train`` is true."""
        raise NotImplementedError

    def backward(self, g: np.ndarray, param_grads: bool = True) -> np.ndarray:
        """Accumulate parameter gradients and get the gradient with respect to the input.

        :param g: The gradient with respect to the output of the last training-mode forward pass
        :param param_grads: Whether to accumulate parameter gradients
        :returns: The gradient with respect to the input
        :raises NoForwardCacheError: if no training-mode forward pass preceded the call
        """
        raise NotImplementedError

    def config(self) -> Dict[str, Any]:
        """Get the constructor arguments of the layer."""
        return {}

    def reset_parameters(self, rng: np.random.Generator, dtype) -> None:
        """Initialize the parameters from a random number generator."""
        for param in self.params.values():
            param.assign(param.data.astype(dtype))

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        """Iterate over the parameters with dotted names."""
        for name, param in self.params.items():
            yield f"{prefix}{name}", param

    def _cached(self):
        if self._cache is None:
            raise NoForwardCacheError
        return self._cache

    def __repr__(self) -> str:  # noqa:D105
        args = ", ".join(f"{k}={v!r}" for k, v in self.config().items() if k != "body")
        return f"{self.__class__.__name__}({args})"


def _he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d(Layer):
    """A 2D convolution (cross-correlation) with zero padding."""

    kind = "conv"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int = 3,
        stride: int = 1,
        padding: Optional[int] = None,
    ):
        """Initialize the convolution.

        :param in_channels: The number of input feature maps
        :param out_channels: The number of output feature maps
        :param kernel: The side length of the square kernel
        :param stride: The step between output positions
        :param padding: The zero padding on each side, defaulting to ``kernel // 2``
        """
        super().__init__()
        if min(in_channels, out_channels, kernel, stride) < 1:
            raise ConfigError("conv channels, kernel and stride must be positive")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.padding = kernel // 2 if padding is None else padding
        self.params = {
            "weight": Parameter(np.zeros((out_channels, in_channels, kernel, kernel))),
            "bias": Parameter(np.zeros(out_channels)),
        }

    def config(self) -> Dict[str, Any]:  # noqa:D102
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel": self.kernel,
            "stride": self.stride,
            "padding": self.padding,
        }

    @property
    def fan_in(self) -> int:
        """Get the number of inputs to each output unit."""
        return self.in_channels * self.kernel * self.kernel

    def reset_parameters(self, rng: np.random.Generator, dtype) -> None:  # noqa:D102
        weight = self.params["weight"]
        weight.assign(_he_uniform(rng, weight.shape, self.fan_in, dtype))
        self.params["bias"].assign(np.zeros(self.out_channels, dtype=dtype))

    def _windows(self, xp: np.ndarray) -> np.ndarray:
        k, s = self.kernel, self.stride
        return sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:  # noqa:D102
        _check_4d(x, self.kind)
        if x.shape[1] != self.in_channels:
            raise ShapeError(f"conv expects {self.in_channels} input channels, got shape {x.shape}")
        p = self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        if xp.shape[2] < self.kernel or xp.shape[3] < self.kernel:
            raise ShapeError(f"input {x.shape} is smaller than the {self.kernel}x{self.kernel} kernel")
        weight, bias = self.params["weight"].data, self.params["bias"].data
        out = np.tensordot(self._windows(xp), weight, axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]
        if train:
            self._cache = (x.shape, xp)
        return np.ascontiguousarray(out)

    def backward(self, g: np.ndarray, param_grads: bool = True) -> np.ndarray:  # noqa:D102
        x_shape, xp = self._cached()
        windows = self._windows(xp)
        if g.shape != (x_shape[0], self.out_channels, *windows.shape[2:4]):
            raise ShapeError(f"conv gradient has shape {g.shape}, expected the output shape")
        weight = self.params["weight"]
        if param_grads:
            weight.grad += np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
            self.params["bias"].grad += g.sum(axis=(0, 2, 3))
        k, s = self.kernel, self.stride
        oh, ow = g.shape[2:]
        dxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                contribution = np.tensordot(g, weight.data[:, :, i, j], axes=([1], [0]))
                dxp[:, :, i : i + s * (oh - 1) + 1 : s, j : j + s * (ow - 1) + 1 : s] += (
                    contribution.transpose(0, 3, 1, 2)
                )
        p = self.padding
        if p:
            dxp = dxp[:, :, p:-p, p:-p]
        return dxp


class BatchNorm2d(Layer):
    """Per-channel batch normalization with running statistics for inference."""

    kind = "batchnorm"

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        """Initialize the batch normalization.

        :param channels: The number of feature maps
        :param momentum: The weight of each new batch in the running statistics
        :param eps: Added to the variance before taking the square root
        """
        super().__init__()
        if channels < 1:
            raise ConfigError("batchnorm needs at least one channel")
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.params = {
            "scale": Parameter(np.ones(channels)),
            "shift": Parameter(np.zeros(channels)),
            "running_mean": Parameter(np.zeros(channels), trainable=False),
            "running_var": Parameter(np.ones(channels), trainable=False),
        }

    def config(self) -> Dict[str, Any]:  # noqa:D102
        return {"channels": self.channels, "momentum": self.momentum, "eps": self.eps}

    def reset_parameters(self, rng: np.random.Generator, dtype) -> None:  # noqa:D102
        c = self.channels
        self.params["scale"].assign(np.ones(c, dtype=dtype))
        self.params["shift"].assign(np.zeros(c, dtype=dtype))
        self.params["running_mean"].assign(np.zeros(c, dtype=dtype))
        self.params["running_var"].assign(np.ones(c, dtype=dtype))

    @staticmethod
    def _channel(v: np.ndarray) -> np.ndarray:
        return v[None, :, None, None]

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:  # noqa:D102
        _check_4d(x, self.kind)
        if x.shape[1] != self.channels:
            raise ShapeError(f"batchnorm expects {self.channels} channels, got shape {x.shape}")
        scale, shift = self.params["scale"].data, self.params["shift"].data
        if train:
            count = x.shape[0] * x.shape[2] * x.shape[3]
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat = (x - self._channel(mean)) * self._channel(inv_std)
            m = self.momentum
            unbiased = var * count / (count - 1) if count > 1 else var
            running_mean, running_var = self.params["running_mean"], self.params["running_var"]
            running_mean.data = ((1 - m) * running_mean.data + m * mean).astype(x.dtype)
            running_var.data = ((1 - m) * running_var.data + m * unbiased).astype(x.dtype)
            self._cache = (xhat, inv_std)
        else:
            mean = self.params["running_mean"].data
            var = self.params["running_var"].data
            xhat = (x - self._channel(mean)) / self._channel(np.sqrt(var + self.eps))
        return self._channel(scale) * xhat + self._channel(shift)

    def backward(self, g: np.ndarray, param_grads: bool = True) -> np.ndarray:  # noqa:D102
        xhat, inv_std = self._cached()
        if g.shape != xhat.shape:
            raise ShapeError(f"batchnorm gradient has shape {g.shape}, expected {xhat.shape}")
        axes = (0, 2, 3)
        if param_grads:
            self.params["scale"].grad += (g * xhat).sum(axis=axes)
            self.params["shift"].grad += g.sum(axis=axes)
        count = g.shape[0] * g.shape[2] * g.shape[3]
        dxhat = g * self._channel(self.params["scale"].data)
        return (
            self._channel(inv_std)
            / count
            * (
                count * dxhat
                - dxhat.sum(axis=axes, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
            )
        )


class ReLU(Layer):
    """The rectified linear unit."""

    kind = "relu"

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:  # noqa:D102
        mask = x > 0
        if train:
            self._cache = mask
        return np.where(mask, x, 0.0).astype(x.dtype)

    def backward(self, g: np.ndarray, param_grads: bool = True) -> np.ndarray:  # noqa:D102
        mask = self._cached()
        return np.where(mask, g, 0.0).astype(g.dtype)


class LeakyReLU(Layer):
    """The leaky rectified linear unit."""

    kind = "leaky_relu"

    def __init__(self, slope: float = 0.2):
        """Initialize the activation.

        :param slope: The gradient for negative inputs
        """
        super().__init__()
        self.slope = slope

    def config(self) -> Dict[str, Any]:  # noqa:D102
        return {"slope": self.slope}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:  # noqa:D102
        mask = x > 0
        if train:
            self._cache = mask
        return np.where(mask, x, self.slope * x).astype(x.dtype)

    def backward(self, g: np.ndarray, param_grads: bool = True) -> np.ndarray:  # noqa:D102
        mask = self._cached()
        return np.where(mask, g, self.slope * g).astype(g.dtype)


class Sigmoid(Layer):
    """The logistic function, with logits clipped to [-15, 15]."""

    kind = "sigmoid"

    #: Logits beyond this magnitude are clipped so that outputs stay strictly inside (0, 1)
    limit: ClassVar[float] = 15.0

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:  # noqa:D102
        out = 1.0 / (1.0 + np.exp(-np.clip(x, -self.limit, self.limit)))
        out = out.astype(x.dtype)
        if train:
            self._cache = (out, np.abs(x) < self.limit)
        return out

    def backward(self, g: np.ndarray, param_grads: bool = True) -> np.ndarray:  # noqa:D102
        out, inside = self._cached()
        return np.where(inside, g * out * (1.0 - out), 0.0).astype(g.dtype)


class Dense(Layer):
    """A fully connected layer over the flattened input, giving (n, out, 1, 1)."""

    kind = "dense"

    def __init__(self, in_features: int, out_features: int):
        """Initialize the layer.

        :param in_features: The flattened size of each input item
        :param out_features: The number of outputs per item
        """
        super().__init__()
        if min(in_features, out_features) < 1:
            raise ConfigError("dense widths must be positive")
        self.in_features = in_features
        self.out_features = out_features
        self.params = {
            "weight": Parameter(np.zeros((out_features, in_features))),
            "bias": Parameter(np.zeros(out_features)),
        }

    def config(self) -> Dict[str, Any]:  # noqa:D102
        return {"in_features": self.in_features, "out_features": self.out_features}

    def reset_parameters(self, rng: np.random.Generator, dtype) -> None:  # noqa:D102
        weight = self.params["weight"]
        weight.assign(_he_uniform(rng, weight.shape, self.in_features, dtype))
        self.params["bias"].assign(np.zeros(self.out_features, dtype=dtype))

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:  # noqa:D102
        flat = x.reshape(x.shape[0], -1)
        if flat.shape[1] != self.in_features:
            raise ShapeError(
                f"dense expects {self.in_features} features per item, got shape {x.shape}"
            )
        out = flat @ self.params["weight"].data.T + self.params["bias"].data
        if train:
            self._cache = (x.shape, flat)
        return out.reshape(x.shape[0], self.out_features, 1, 1)

    def backward(self, g: np.ndarray, param_grads: bool = True) -> np.ndarray:  # noqa:D102
        x_shape, flat = self._cached()
        g2 = g.reshape(x_shape[0], -1)
        if g2.shape[1] != self.out_features:
            raise ShapeError(f"dense gradient has shape {g.shape}")
        if param_grads:
            self.params["weight"].grad += g2.T @ flat
            self.params["bias"].grad += g2.sum(axis=0)
        return (g2 @ self.params["weight"].data).reshape(x_shape)


def pixel_shuffle(x: np.ndarray, factor: int) -> np.ndarray:
    """Rearrange (n, c·r², h, w) into (n, c, h·r, w·r).

    Output pixel ``[b, c, y·r + i, x·r + j]`` is input ``[b, c·r² + i·r + j, y, x]``.
    """
    _check_4d(x, "pixel_shuffle")
    n, c, h, w = x.shape
    r = factor
    if c % (r * r):
        raise ShapeError(f"pixel_shuffle needs channels divisible by {r * r}, got shape {x.shape}")
    out = x.reshape(n, c // (r * r), r, r, h, w).transpose(0, 1, 4, 2, 5, 3)
    return out.reshape(n, c // (r * r), h * r, w * r)


def inverse_pixel_shuffle(x: np.ndarray, factor: int) -> np.ndarray:
    """Rearrange (n, c, h·r, w·r) into (n, c·r², h, w), undoing :func:`pixel_shuffle`."""
    _check_4d(x, "inverse_pixel_shuffle")
    n, c, hr, wr = x.shape
    r = factor
    if hr % r or wr % r:
        raise ShapeError(f"spatial size must be divisible by {r}, got shape {x.shape}")
    out = x.reshape(n, c, hr // r, r, wr // r, r).transpose(0, 1, 3, 5, 2, 4)
    return out.reshape(n, c * r * r, hr // r, wr // r)


class PixelShuffle(Layer):
    """Sub-pixel upscaling that moves channels into space."""

    kind = "pixel_shuffle"

    def __init__(self, factor: int = 2):
        """Initialize the layer.

        :param factor: The upscaling factor
        """
        super().__init__()
        if factor < 1:
            raise ConfigError("pixel_shuffle factor must be positive")
        self.factor = factor

    def config(self) -> Dict[str, Any]:  # noqa:D102
        return {"factor": self.factor}

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:  # noqa:D102
        out = pixel_shuffle(x, self.factor)
        if train:
            self._cache = out.shape
        return out

    def backward(self, g: np.ndarray, param_grads: bool = True) -> np.ndarray:  # noqa:D102
        shape = self._cached()
        if g.shape != shape:
            raise ShapeError(f"pixel_shuffle gradient has shape {g.shape}, expected {shape}")
        return inverse_pixel_shuffle(g, self.factor)


class Sequential(Layer):
    """A chain of layers applied in order."""

    kind = "sequential"

    def __init__(self, layers: Iterable[Layer] = ()):
        """Initialize the chain.

        :param layers: The layers, first to last
        """
        super().__init__()
        self.layers: List[Layer] = list(layers)

    def __len__(self) -> int:  # noqa:D105
        return len(self.layers)

    def __getitem__(self, index: int) -> Layer:  # noqa:D105
        return self.layers[index]

    def config(self) -> Dict[str, Any]:  # noqa:D102
        return {"body": self.layer_table()}

    def layer_table(self) -> LayerTable:
        """Get the (kind, configuration) of each layer."""
        return [(layer.kind, layer.config()) for layer in self.layers]

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:  # noqa:D102
        for index, layer in enumerate(self.layers):
            yield from layer.named_parameters(f"{prefix}{index}.")

    def reset_parameters(self, rng: np.random.Generator, dtype) -> None:  # noqa:D102
        for layer in self.layers:
            layer.reset_parameters(rng, dtype)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:  # noqa:D102
        for index, layer in enumerate(self.layers):
            try:
                x = layer.forward(x, train=train)
            except ShapeError as e:
                raise ShapeError(f"layer {index} ({layer.kind}): {e}") from e
        return x

    def backward(self, g: np.ndarray, param_grads: bool = True) -> np.ndarray:  # noqa:D102
        for index in reversed(range(len(self.layers))):
            layer = self.layers[index]
            try:
                g = layer.backward(g, param_grads=param_grads)
            except NoForwardCacheError:
                raise
            except ShapeError as e:
                raise ShapeError(f"layer {index} ({layer.kind}): {e}") from e
        return g


class Skip(Layer):
    """Adds the input of a chain of layers to its output."""

    kind = "elementwise_add"

    def __init__(self, body: Sequence[Layer]):
        """Initialize the skip connection.

        :param body: The layers whose output is added to their input
        """
        super().__init__()
        self.body = body if isinstance(body, Sequential) else Sequential(body)

    def config(self) -> Dict[str, Any]:  # noqa:D102
        return {"body": self.body.layer_table()}

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:  # noqa:D102
        yield from self.body.named_parameters(f"{prefix}body.")

    def reset_parameters(self, rng: np.random.Generator, dtype) -> None:  # noqa:D102
        self.body.reset_parameters(rng, dtype)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:  # noqa:D102
        out = self.body.forward(x, train=train)
        if out.shape != x.shape:
            raise ShapeError(f"skip body maps {x.shape} to {out.shape}; shapes must agree")
        if train:
            self._cache = True
        return x + out

    def backward(self, g: np.ndarray, param_grads: bool = True) -> np.ndarray:  # noqa:D102
        self._cached()
        return g + self.body.backward(g, param_grads=param_grads)


class ResidualBlock(Skip):
    """conv → batchnorm → ReLU → conv → batchnorm, plus the identity skip."""

    kind = "residual_block"

    def __init__(self, channels: int, kernel: int = 3):
        """Initialize the block.

        :param channels: The number of feature maps, kept throughout
        :param kernel: The side length of both convolutions
        """
        super().__init__(
            [
                Conv2d(channels, channels, kernel),
                BatchNorm2d(channels),
                ReLU(),
                Conv2d(channels, channels, kernel),
                BatchNorm2d(channels),
            ]
        )
        self.channels = channels
        self.kernel = kernel

    def config(self) -> Dict[str, Any]:  # noqa:D102
        return {"channels": self.channels, "kernel": self.kernel}


LAYER_KINDS: Dict[str, Type[Layer]] = {
    cls.kind: cls
    for cls in [
        Conv2d,
        BatchNorm2d,
        ReLU,
        LeakyReLU,
        Sigmoid,
        Dense,
        PixelShuffle,
        ResidualBlock,
        Skip,
        Sequential,
    ]
}


def build_layer(kind: str, config: Dict[str, Any]) -> Layer:
    """Rebuild a layer from an entry of a layer table.

    :raises ConfigError: if the kind is unknown
    """
    cls = LAYER_KINDS.get(kind)
    if cls is None:
        raise ConfigError(f"unknown layer kind: {kind}")
    if cls in (Skip, Sequential):
        return cls([build_layer(k, c) for k, c in config["body"]])  # type:ignore
    return cls(**config)
