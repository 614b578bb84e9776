# -*- coding: utf-8 -*-

"""Saliency-guided adversarial super-resolution: networks, losses, data, and training."""

from .data import PairDataset, augment_pairs, load_directory, synthetic_patches  # noqa:F401
from .losses import (  # noqa:F401
    LossConfig,
    LossTerms,
    content_loss,
    grad_discriminator,
    grad_feature,
    grad_generator_adv,
    grad_saliency,
    grad_weighted_mse,
    loss_discriminator,
    loss_feature,
    loss_generator_adv,
    loss_saliency,
    loss_weighted_mse,
    total_generator_loss,
)
from .models import (  # noqa:F401
    DiscriminatorSpec,
    FeatureExtractor,
    GeneratorSpec,
    IdentityFeatureExtractor,
    NetworkFeatureExtractor,
    build_discriminator,
    build_generator,
    default_feature_extractor,
    generator_parameter_count,
)
from .training import (  # noqa:F401
    LossLog,
    RunDirectory,
    TrainConfig,
    pretrain_generator,
    super_resolve,
    train_cascade,
    train_gan,
)
