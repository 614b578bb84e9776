# -*- coding: utf-8 -*-

"""The Adam optimizer."""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from .network import Network
from ..utils import ConfigError

__all__ = [
    "AdamState",
    "adam_step",
    "Adam",
]

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Moment estimates and hyperparameters of Adam."""

    #: First moment estimates by parameter name
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    #: Second moment estimates by parameter name
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    #: The number of applied updates
    step: int = 0
    #: The number of updates skipped because of non-finite gradients
    skipped: int = 0
    beta1: float = 0.93
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError(f"Adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if not self.eps > 0:
            raise ConfigError(f"Adam eps must be positive, got {self.eps}")


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """Apply one bias-corrected Adam update.

    If any gradient holds a NaN or an infinity, the update is skipped: the
    parameters and moments are returned unchanged and ``state.skipped`` is
    incremented.

    :param params: The parameters by name
    :param grads: The gradients by name, with the same names and shapes
    :param state: The optimizer state, which is not modified
    :param lr: The learning rate
    :returns: The updated parameters and the updated state
    :raises ConfigError: if the learning rate is not positive, or names or shapes of
        parameters and gradients disagree
    """
    if not lr > 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    if set(params) != set(grads):
        raise ConfigError("parameters and gradients have different names")
    for name, value in params.items():
        if np.shape(grads[name]) != np.shape(value):
            raise ConfigError(f"gradient of {name} has shape {np.shape(grads[name])}")

    if not all(np.all(np.isfinite(g)) for g in grads.values()):
        logger.warning("skipping Adam step %d: non-finite gradient", state.step + 1)
        return dict(params), replace(state, skipped=state.skipped + 1)

    step = state.step + 1
    b1, b2 = state.beta1, state.beta2
    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        g = np.asarray(grads[name])
        m = b1 * state.m.get(name, np.zeros_like(g)) + (1.0 - b1) * g
        v = b2 * state.v.get(name, np.zeros_like(g)) + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**step)
        v_hat = v / (1.0 - b2**step)
        update = lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_params[name] = (value - update).astype(np.asarray(value).dtype)
        new_m[name] = m
        new_v[name] = v
    return new_params, replace(state, m=new_m, v=new_v, step=step)


class Adam:
    """Adam over the trainable parameters of a network, updated in place."""

    def __init__(self, net: Network, lr: float = 1e-3, state: Optional[AdamState] = None, **kwargs):
        """Initialize the optimizer.

        :param net: The network whose trainable parameters are optimized
        :param lr: The learning rate
        :param state: A state to resume from, e.g. one read from a checkpoint
        :param kwargs: Hyperparameters for a fresh :class:`AdamState`
        """
        self.net = net
        self.lr = lr
        self.state = state if state is not None else AdamState(**kwargs)

    def step(self) -> bool:
        """Apply one update from the accumulated gradients.

        :returns: If the update was applied (false when it was skipped)
        """
        if self.net.frozen:
            return False
        named = dict(self.net.named_parameters(trainable_only=True))
        params = {name: param.data for name, param in named.items()}
        grads = {name: param.grad for name, param in named.items()}
        skipped = self.state.skipped
        new_params, self.state = adam_step(params, grads, self.state, self.lr)
        for name, param in named.items():
            param.data = new_params[name]
        return self.state.skipped == skipped
