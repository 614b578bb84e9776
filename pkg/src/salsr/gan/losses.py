# -*- coding: utf-8 -*-

"""Loss terms of the generator and the discriminator, with their gradients.

Every ``loss_*`` function returns a float and has a ``grad_*`` companion that
returns the gradient of the same value with respect to the super-resolved
image (or, for the adversarial terms, the discriminator probabilities).
"""

import logging
from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Optional, Tuple

import numpy as np

from .models import FeatureExtractor
from ..imgcore import LUMA_WEIGHTS, Plane
from ..saliency import SaliencyConfig, saliency_map, saliency_map_backward
from ..utils import ConfigError, DimensionMismatchError, ProbabilityRangeError

__all__ = [
    "WmseForm",
    "LossConfig",
    "LossTerms",
    "loss_weighted_mse",
    "grad_weighted_mse",
    "loss_feature",
    "grad_feature",
    "loss_saliency",
    "grad_saliency",
    "loss_generator_adv",
    "grad_generator_adv",
    "loss_discriminator",
    "grad_discriminator",
    "total_generator_loss",
    "content_loss",
    "luma",
]

logger = logging.getLogger(__name__)

#: ``verbatim`` weights the images inside the square; ``error-weighted`` weights the squared error
WmseForm = Literal["verbatim", "error-weighted"]


@dataclass(frozen=True)
class LossConfig:
    """Weights of the generator loss terms."""

    #: Weight of the adversarial term
    alpha: float = 0.01
    lambda_wmse: float = 1.0
    lambda_feat: float = 1.0
    lambda_sal: float = 1.0
    wmse_form: str = "verbatim"
    saliency: SaliencyConfig = field(default_factory=SaliencyConfig)

    def __post_init__(self):
        for name in ("alpha", "lambda_wmse", "lambda_feat", "lambda_sal"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ConfigError(f"{name} must be finite and non-negative, got {value}")
        if not (self.lambda_wmse > 0 or self.lambda_feat > 0 or self.lambda_sal > 0):
            raise ConfigError("at least one content loss weight must be positive")
        if self.wmse_form not in ("verbatim", "error-weighted"):
            raise ConfigError(f"unknown weighted MSE form: {self.wmse_form}")


class LossTerms(NamedTuple):
    """Values of the individual generator loss terms."""

    wmse: float = 0.0
    feat: float = 0.0
    sal: float = 0.0
    gen: float = 0.0


def _same_shape(*arrays: np.ndarray) -> None:
    shapes = [np.shape(a) for a in arrays]
    if len(set(shapes)) != 1:
        raise DimensionMismatchError(shapes)


def _f64(*arrays):
    return tuple(np.asarray(a, dtype=np.float64) for a in arrays)


def loss_weighted_mse(
    hr: Plane,
    sr: Plane,
    sal_hr: Plane,
    sal_sr: Plane,
    form: WmseForm = "verbatim",
) -> float:
    """Compute the saliency-weighted mean squared error.

    The ``verbatim`` form is ``mean((sal_hr * hr - sal_sr * sr) ** 2)``; the
    ``error-weighted`` form is ``mean(sal_hr * (hr - sr) ** 2)``.
    """
    _same_shape(hr, sr, sal_hr, sal_sr)
    hr, sr, sal_hr, sal_sr = _f64(hr, sr, sal_hr, sal_sr)
    if form == "verbatim":
        return float(np.mean((sal_hr * hr - sal_sr * sr) ** 2))
    if form == "error-weighted":
        return float(np.mean(sal_hr * (hr - sr) ** 2))
    raise ConfigError(f"unknown weighted MSE form: {form}")


def grad_weighted_mse(
    hr: Plane,
    sr: Plane,
    sal_hr: Plane,
    sal_sr: Plane,
    form: WmseForm = "verbatim",
) -> Tuple[np.ndarray, np.ndarray]:
    """Get the gradients of :func:`loss_weighted_mse` with respect to ``sr`` and ``sal_sr``.

    Chain the second through :func:`salsr.saliency.saliency_map_backward` when
    ``sal_sr`` is the saliency map of ``sr``.
    """
    _same_shape(hr, sr, sal_hr, sal_sr)
    hr, sr, sal_hr, sal_sr = _f64(hr, sr, sal_hr, sal_sr)
    n = hr.size
    if form == "verbatim":
        residual = sal_hr * hr - sal_sr * sr
        return -2.0 * residual * sal_sr / n, -2.0 * residual * sr / n
    if form == "error-weighted":
        return -2.0 * sal_hr * (hr - sr) / n, np.zeros_like(sr)
    raise ConfigError(f"unknown weighted MSE form: {form}")


def _batch(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        return x[None, None]
    if x.ndim == 3:
        return x[None]
    return x


def loss_feature(hr: np.ndarray, sr: np.ndarray, fx: FeatureExtractor) -> float:
    """Compute the squared feature distance, normalized by the feature map area.

    Images may be planes, (c, h, w) arrays or (n, c, h, w) batches; for
    batches the per-image values are averaged.
    """
    _same_shape(hr, sr)
    phi_hr = fx.features(_batch(hr))
    phi_sr = fx.features(_batch(sr))
    n, _, height, width = phi_sr.shape
    return float(np.sum((phi_hr - phi_sr) ** 2) / (n * height * width))


def grad_feature(hr: np.ndarray, sr: np.ndarray, fx: FeatureExtractor) -> np.ndarray:
    """Get the gradient of :func:`loss_feature` with respect to ``sr``, shaped like ``sr``."""
    _same_shape(hr, sr)
    phi_hr = fx.features(_batch(hr))
    phi_sr = fx.features(_batch(sr), track=True)
    n, _, height, width = phi_sr.shape
    g = fx.backward(2.0 * (phi_sr - phi_hr) / (n * height * width))
    return np.asarray(g, dtype=np.float64).reshape(np.shape(sr))


def loss_saliency(
    hr: Plane,
    sr: Plane,
    cfg: Optional[SaliencyConfig] = None,
    sal_hr: Optional[Plane] = None,
) -> float:
    """Compute the mean squared difference of the saliency maps of ``hr`` and ``sr``.

    :param sal_hr: The saliency map of ``hr``, if already known
    """
    _same_shape(hr, sr)
    if sal_hr is None:
        sal_hr = saliency_map(hr, cfg)
    return float(np.mean((sal_hr - saliency_map(sr, cfg)) ** 2))


def grad_saliency(
    hr: Plane,
    sr: Plane,
    cfg: Optional[SaliencyConfig] = None,
    sal_hr: Optional[Plane] = None,
) -> np.ndarray:
    """Get the gradient of :func:`loss_saliency` with respect to ``sr``."""
    _same_shape(hr, sr)
    if sal_hr is None:
        sal_hr = saliency_map(hr, cfg)
    sal_sr = saliency_map(sr, cfg)
    upstream = -2.0 * (sal_hr - sal_sr) / sal_sr.size
    return saliency_map_backward(sr, upstream, cfg)


def _probabilities(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64).ravel()
    if d.size == 0 or np.any(~np.isfinite(d)) or np.any(d <= 0.0) or np.any(d >= 1.0):
        raise ProbabilityRangeError(d)
    return d


def loss_generator_adv(d_out: np.ndarray) -> float:
    """Compute the non-saturating adversarial loss ``sum(-log d_out)`` over the batch."""
    return float(-np.sum(np.log(_probabilities(d_out))))


def grad_generator_adv(d_out: np.ndarray) -> np.ndarray:
    """Get the gradient of :func:`loss_generator_adv`, shaped like ``d_out``."""
    d = _probabilities(d_out)
    return (-1.0 / d).reshape(np.shape(d_out))


def loss_discriminator(d_real: np.ndarray, d_fake: np.ndarray) -> float:
    """Compute the binary cross-entropy ``-mean(log d_real) - mean(log(1 - d_fake))``."""
    real = _probabilities(d_real)
    fake = _probabilities(d_fake)
    return float(-np.mean(np.log(real)) - np.mean(np.log1p(-fake)))


def grad_discriminator(d_real: np.ndarray, d_fake: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Get the gradients of :func:`loss_discriminator` with respect to both probability batches."""
    real = _probabilities(d_real)
    fake = _probabilities(d_fake)
    return (
        (-1.0 / (real.size * real)).reshape(np.shape(d_real)),
        (1.0 / (fake.size * (1.0 - fake))).reshape(np.shape(d_fake)),
    )


def total_generator_loss(terms: LossTerms, cfg: LossConfig) -> float:
    """Combine the loss terms into the generator objective.

    The content loss ``lambda_wmse * wmse + lambda_feat * feat + lambda_sal * sal``
    is added to ``alpha`` times the adversarial term.
    """
    content = cfg.lambda_wmse * terms.wmse + cfg.lambda_feat * terms.feat + cfg.lambda_sal * terms.sal
    return float(content + cfg.alpha * terms.gen)


def luma(x: np.ndarray) -> np.ndarray:
    """Get the luma plane of a (c, h, w) image with one or three channels."""
    if x.shape[0] == 1:
        return x[0]
    wr, wg, wb = LUMA_WEIGHTS
    return wr * x[0] + wg * x[1] + wb * x[2]


def _luma_backward(g: Plane, channels: int) -> np.ndarray:
    if channels == 1:
        return g[None]
    return np.stack([w * g for w in LUMA_WEIGHTS])


def content_loss(
    hr: np.ndarray,
    sr: np.ndarray,
    cfg: LossConfig,
    fx: Optional[FeatureExtractor] = None,
    sal_hr: Optional[np.ndarray] = None,
    grad: bool = True,
) -> Tuple[LossTerms, Optional[np.ndarray]]:
    """Compute the content terms on a (n, c, h, w) batch and their gradient with respect to ``sr``.

    Saliency maps are computed on the luma plane of each image. The weighted
    MSE is averaged over channels and every term is averaged over the batch.
    Terms whose weight is zero are skipped and reported as zero.

    :param hr: The ground truth batch
    :param sr: The super-resolved batch
    :param cfg: The loss weights and saliency parameters
    :param fx: The feature extractor, required when ``lambda_feat`` is positive
    :param sal_hr: Precomputed (n, h, w) saliency maps of ``hr``
    :param grad: Whether to compute the gradient
    :returns: The unweighted terms (``gen`` is zero) and the weighted gradient, or None
    """
    _same_shape(hr, sr)
    hr, sr = _f64(hr, sr)
    n, c = sr.shape[:2]
    need_saliency = cfg.lambda_wmse > 0 or cfg.lambda_sal > 0
    wmse = sal = 0.0
    g = np.zeros_like(sr) if grad else None
    for i in range(n):
        if not need_saliency:
            break
        hr_luma, sr_luma = luma(hr[i]), luma(sr[i])
        s_hr = sal_hr[i] if sal_hr is not None else saliency_map(hr_luma, cfg.saliency)
        s_sr = saliency_map(sr_luma, cfg.saliency)
        g_sal = np.zeros_like(sr_luma)
        if cfg.lambda_wmse > 0:
            for k in range(c):
                wmse += loss_weighted_mse(hr[i, k], sr[i, k], s_hr, s_sr, cfg.wmse_form) / (n * c)
                if grad:
                    g_sr, g_s = grad_weighted_mse(hr[i, k], sr[i, k], s_hr, s_sr, cfg.wmse_form)
                    g[i, k] += cfg.lambda_wmse * g_sr / (n * c)
                    g_sal += cfg.lambda_wmse * g_s / (n * c)
        if cfg.lambda_sal > 0:
            sal += float(np.mean((s_hr - s_sr) ** 2)) / n
            if grad:
                g_sal += cfg.lambda_sal * -2.0 * (s_hr - s_sr) / (s_sr.size * n)
        if grad and np.any(g_sal):
            g[i] += _luma_backward(saliency_map_backward(sr_luma, g_sal, cfg.saliency), c)

    feat = 0.0
    if cfg.lambda_feat > 0:
        if fx is None:
            raise ConfigError("a feature extractor is needed when lambda_feat is positive")
        feat = loss_feature(hr, sr, fx)
        if grad:
            g += cfg.lambda_feat * grad_feature(hr, sr, fx)
    return LossTerms(wmse=wmse, feat=feat, sal=sal), g
