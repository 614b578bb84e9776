# -*- coding: utf-8 -*-

"""Saliency-guided single-image super-resolution with generative adversarial networks."""

from .degrade import bicubic_upscale, make_lr  # noqa:F401
from .imgcore import RgbImage, load_image, save_image  # noqa:F401
from .metrics import evaluate_pair  # noqa:F401
from .saliency import SaliencyConfig, saliency_map  # noqa:F401
