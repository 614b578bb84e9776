# -*- coding: utf-8 -*-

"""Reusable finite-difference tests for :mod:`salsr` gradients."""

import unittest
from typing import Callable, ClassVar, Iterable, Optional

import numpy as np

from salsr.nn import Network, init_params

__all__ = [
    "numerical_gradient",
    "GradientCheckTestCase",
]


def numerical_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Estimate the gradient of a scalar function with central differences.

    :param f: The function, called with perturbed copies of ``x``
    :param x: The point, converted to double precision
    :param eps: The perturbation of each element
    :returns: An array shaped like ``x``
    """
    x = np.array(x, dtype=np.float64)
    rv = np.zeros_like(x)
    for index in np.ndindex(*x.shape):
        original = x[index]
        x[index] = original + eps
        upper = f(x)
        x[index] = original - eps
        lower = f(x)
        x[index] = original
        rv[index] = (upper - lower) / (2.0 * eps)
    return rv


class GradientCheckTestCase(unittest.TestCase):
    """A test case that compares analytic gradients against central differences.

    Gradients are close when every element differs by at most
    ``atol + rtol * scale``, where ``scale`` is the largest magnitude of either
    gradient.
    """

    rtol: ClassVar[float] = 1e-4
    atol: ClassVar[float] = 1e-6
    #: Seeds that parametrize the random inputs of each check
    seeds: ClassVar[Iterable[int]] = range(5)

    def assert_gradients_close(self, analytic: np.ndarray, numeric: np.ndarray, msg: Optional[str] = None):
        """Assert that an analytic gradient matches a numerical one."""
        analytic = np.asarray(analytic, dtype=np.float64)
        numeric = np.asarray(numeric, dtype=np.float64)
        self.assertEqual(numeric.shape, analytic.shape, msg=msg)
        scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0))
        error = np.abs(analytic - numeric).max(initial=0.0)
        self.assertLessEqual(
            error,
            self.atol + self.rtol * scale,
            msg=f"{msg or 'gradient mismatch'}: max error {error:.3g} at scale {scale:.3g}",
        )

    def assert_function_gradient(
        self,
        f: Callable[[np.ndarray], float],
        grad_f: Callable[[np.ndarray], np.ndarray],
        x: np.ndarray,
        msg: Optional[str] = None,
    ):
        """Assert that ``grad_f`` is the gradient of ``f`` at ``x``."""
        self.assert_gradients_close(grad_f(np.array(x, dtype=np.float64)), numerical_gradient(f, x), msg=msg)

    def assert_network_gradients(self, net: Network, input_shape, seed: int = 0):
        """Assert that a network's input and parameter gradients match central differences.

        The network is initialized in double precision from ``seed`` and
        differentiated through the scalar ``sum(upstream * net(x))`` for a
        random input and upstream gradient.
        """
        init_params(net, seed, dtype=np.float64)
        rng = np.random.default_rng(seed + 1)
        x = rng.standard_normal(input_shape)
        upstream = rng.standard_normal(net.forward(x, mode="train").shape)

        def _objective(value: np.ndarray) -> float:
            return float(np.sum(upstream * net.forward(value, mode="train")))

        net.forward(x, mode="train")
        net.zero_grad()
        dx = net.backward(upstream)
        self.assert_gradients_close(dx, numerical_gradient(_objective, x), msg="input gradient")

        for name, param in net.named_parameters(trainable_only=True):
            analytic = param.grad.copy()
            original = param.data.copy()

            def _param_objective(value: np.ndarray, param=param) -> float:
                param.data = value
                return _objective(x)

            numeric = numerical_gradient(_param_objective, original)
            param.data = original
            self.assert_gradients_close(analytic, numeric, msg=f"gradient of {name}")
