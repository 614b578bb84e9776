# -*- coding: utf-8 -*-

"""Two-phase training of cascaded ×2 generators and super-resolution with them.

A stage is first pretrained on plain MSE, then trained adversarially against
a discriminator. Stage k (counting from 1) learns on HR patches of side
``patch_size * 2 ** (k - 1)``, and stages are chained at inference time.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm.auto import trange

from .data import PairDataset, augment_pairs
from .losses import (
    LossConfig,
    content_loss,
    grad_generator_adv,
    loss_discriminator,
    loss_generator_adv,
    total_generator_loss,
)
from .models import (
    DiscriminatorSpec,
    FeatureExtractor,
    GeneratorSpec,
    build_discriminator,
    build_generator,
    default_feature_extractor,
    spec_to_dict,
)
from ..degrade import bicubic_upscale, check_scale
from ..imgcore import Plane, RgbImage, save_image
from ..nn import Adam, Network, init_params, save_checkpoint
from ..utils import (
    ConfigError,
    DivergenceError,
    ShapeError,
    StageCountError,
    get_git_hash,
    get_version,
)

__all__ = [
    "TrainConfig",
    "LOSS_COLUMNS",
    "PRETRAIN_COLUMNS",
    "LossLog",
    "RunDirectory",
    "derive_seed",
    "pretrain_generator",
    "train_gan",
    "train_cascade",
    "super_resolve",
]

logger = logging.getLogger(__name__)

#: Columns of the adversarial phase's loss log
LOSS_COLUMNS = ("iter", "l_wmse", "l_feat", "l_sal", "l_gen", "l_total", "d_loss")
#: Columns of the pretraining phase's loss log
PRETRAIN_COLUMNS = ("iter", "mse")

_INIT_GENERATOR, _INIT_DISCRIMINATOR, _PRETRAIN_BATCHES, _GAN_BATCHES, _AUGMENT = range(5)


@dataclass(frozen=True)
class TrainConfig:
    """Parameters of the training procedure."""

    pretrain_lr: float = 1e-3
    pretrain_iters: int = 500
    gan_lr: float = 1e-3
    gan_iters: int = 2000
    batch_size: int = 8
    seed: int = 0
    #: The number of ×2 stages to train
    stages: int = 1
    #: Discriminator updates per generator update
    d_steps: int = 1
    #: Side length of the first stage's HR patches
    patch_size: int = 32
    #: Augmented copies per training patch
    augment: int = 0
    #: Interval of the INFO log lines, in iterations
    log_every: int = 100
    #: Interval of the sample grids written to the run directory; 0 disables them
    sample_every: int = 0
    #: Interval of intermediate checkpoints; 0 writes only the final ones
    checkpoint_every: int = 0

    def __post_init__(self):
        for name in ("pretrain_lr", "gan_lr"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be positive, got {value}")
        for name in ("pretrain_iters", "gan_iters", "augment", "sample_every", "checkpoint_every"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        for name in ("batch_size", "stages", "d_steps", "log_every"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.patch_size < 16 or self.patch_size % 2:
            raise ConfigError(f"patch_size must be even and >= 16, got {self.patch_size}")

    def stage_patch_size(self, stage: int) -> int:
        """Get the HR patch side length of a 1-based stage."""
        return self.patch_size * 2 ** (stage - 1)


def derive_seed(seed: int, stage: int, purpose: int) -> int:
    """Derive an independent seed for one use of randomness within one stage."""
    return int(np.random.SeedSequence([seed, stage, purpose]).generate_state(1)[0])


def _format(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


class LossLog:
    """Rows of per-iteration losses, optionally mirrored to a CSV file as they arrive."""

    def __init__(self, columns: Sequence[str] = LOSS_COLUMNS, path: Union[None, str, Path] = None):
        """Initialize the log.

        :param columns: The column names
        :param path: A CSV file to (re)write, or None to keep the rows in memory only
        """
        self.columns = tuple(columns)
        self.rows: List[Dict[str, Any]] = []
        self.path = None if path is None else Path(path)
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("w", newline="") as file:
                csv.writer(file).writerow(self.columns)

    def __len__(self) -> int:  # noqa:D105
        return len(self.rows)

    def append(self, **values) -> None:
        """Add a row; every column must be given."""
        row = {column: values[column] for column in self.columns}
        self.rows.append(row)
        if self.path is not None:
            with self.path.open("a", newline="") as file:
                csv.writer(file).writerow([_format(row[column]) for column in self.columns])

    def column(self, name: str) -> np.ndarray:
        """Get the values of a column in row order."""
        return np.asarray([row[name] for row in self.rows], dtype=np.float64)


class RunDirectory:
    """The layout of a training run's output directory.

    ::

        config.json
        stage-1/
            pretrain.csv
            losses.csv
            checkpoints/pretrained.ckpt
            checkpoints/generator.ckpt
            checkpoints/discriminator.ckpt
            samples/iter-000100.png
    """

    def __init__(self, root: Union[str, Path]):
        """Initialize the layout, creating the root directory."""
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def write_config(self, config: Mapping[str, Any]) -> Path:
        """Snapshot the effective configuration with the package version and git hash."""
        path = self.root / "config.json"
        payload = {"version": get_version(), "git_hash": get_git_hash(), **config}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
        return path

    def stage(self, stage: int) -> Path:
        """Get the directory of a 1-based stage."""
        rv = self.root / f"stage-{stage}"
        rv.mkdir(parents=True, exist_ok=True)
        return rv

    def loss_log_path(self, stage: int, phase: str = "gan") -> Path:
        """Get the loss log of a stage's ``pretrain`` or ``gan`` phase."""
        return self.stage(stage) / ("pretrain.csv" if phase == "pretrain" else "losses.csv")

    def checkpoint_path(self, stage: int, name: str) -> Path:
        """Get the path of a stage's checkpoint."""
        return self.stage(stage) / "checkpoints" / f"{name}.ckpt"

    def sample_path(self, stage: int, iteration: int) -> Path:
        """Get the path of a stage's sample grid."""
        return self.stage(stage) / "samples" / f"iter-{iteration:06d}.png"

    def generator_paths(self) -> List[Path]:
        """Get the final generator checkpoint of every stage that has one, in stage order."""
        rv = []
        stage = 1
        while (self.root / f"stage-{stage}" / "checkpoints" / "generator.ckpt").is_file():
            rv.append(self.root / f"stage-{stage}" / "checkpoints" / "generator.ckpt")
            stage += 1
        return rv


def _check_dataset(dataset: PairDataset, channels: int) -> None:
    if dataset.scale != 2:
        raise ConfigError(f"generator stages are trained on ×2 pairs, got scale {dataset.scale}")
    if dataset.channels != channels:
        raise ShapeError(f"dataset has {dataset.channels} channels, the generator {channels}")


def _metadata(role: str, spec, stage: int, iteration: int) -> Dict[str, Any]:
    return {"role": role, "spec": spec_to_dict(spec), "stage": stage, "iteration": iteration}


def pretrain_generator(
    dataset: PairDataset,
    gspec: GeneratorSpec,
    tcfg: TrainConfig,
    *,
    stage: int = 1,
    log: Optional[LossLog] = None,
    run: Optional[RunDirectory] = None,
    progress: bool = False,
) -> Network:
    """Train a freshly initialized generator on plain MSE with Adam.

    :param dataset: Aligned ×2 pairs
    :param gspec: The generator architecture
    :param tcfg: The training parameters; ``pretrain_iters`` may be zero
    :param stage: The 1-based stage, which selects the seeds
    :param log: A loss log with :data:`PRETRAIN_COLUMNS` to fill
    :param run: A run directory that receives the ``pretrained`` checkpoint
    :param progress: Whether to show a progress bar
    :returns: The trained generator
    :raises DivergenceError: if the loss becomes non-finite
    """
    _check_dataset(dataset, gspec.channels)
    net = init_params(build_generator(gspec), derive_seed(tcfg.seed, stage, _INIT_GENERATOR))
    rng = np.random.default_rng(derive_seed(tcfg.seed, stage, _PRETRAIN_BATCHES))
    optimizer = Adam(net, lr=tcfg.pretrain_lr)
    for iteration in trange(
        1,
        tcfg.pretrain_iters + 1,
        desc=f"Pretraining stage {stage}",
        unit="iter",
        unit_scale=True,
        disable=not progress,
    ):
        lr_batch, hr_batch = dataset.batch(dataset.sample_indices(rng, tcfg.batch_size))
        sr = net.forward(lr_batch, mode="train")
        diff = sr.astype(np.float64) - hr_batch
        mse = float(np.mean(diff**2))
        if not math.isfinite(mse):
            raise DivergenceError(iteration, {"mse": mse})
        net.zero_grad()
        net.backward(2.0 * diff / diff.size)
        optimizer.step()
        if log is not None:
            log.append(iter=iteration, mse=mse)
        if iteration % tcfg.log_every == 0:
            logger.info("stage %d pretraining iteration %d: mse=%.6g", stage, iteration, mse)
    if run is not None:
        save_checkpoint(
            net,
            run.checkpoint_path(stage, "pretrained"),
            adam_state=optimizer.state,
            metadata=_metadata("generator", gspec, stage, tcfg.pretrain_iters),
        )
    return net


def _sample_grid(generator: Network, dataset: PairDataset, count: int = 4) -> np.ndarray:
    """Lay out rows of (bicubic, SR, HR) for the first patches as a (c, h, w) array."""
    lr_batch, hr_batch = dataset.batch(range(min(count, len(dataset))))
    sr = np.clip(generator.forward(lr_batch, mode="infer"), 0.0, 1.0)
    rows = []
    for lr, out, hr in zip(lr_batch, sr, hr_batch):
        bicubic = np.stack([bicubic_upscale(plane, 2) for plane in lr])
        rows.append(np.concatenate([bicubic, out, hr], axis=2))
    return np.concatenate(rows, axis=1)


def _save_grid(grid: np.ndarray, path: Path) -> None:
    if grid.shape[0] == 1:
        save_image(RgbImage.from_gray(grid[0]), path)
    else:
        save_image(RgbImage.from_array(grid), path)


def _discriminator_step(
    generator: Network,
    discriminator: Network,
    optimizer: Adam,
    lr_batch: np.ndarray,
    hr_batch: np.ndarray,
    iteration: int,
) -> float:
    fake = generator.forward(lr_batch, mode="infer")
    discriminator.zero_grad()
    d_real = discriminator.forward(hr_batch, mode="train")
    if np.all(np.isfinite(d_real)):
        discriminator.backward(-1.0 / (d_real.size * d_real.astype(np.float64)))
    d_fake = discriminator.forward(fake, mode="train")
    if np.all(np.isfinite(d_fake)):
        discriminator.backward(1.0 / (d_fake.size * (1.0 - d_fake.astype(np.float64))))
    if not (np.all(np.isfinite(d_real)) and np.all(np.isfinite(d_fake))):
        raise DivergenceError(iteration, {"d_loss": math.nan})
    d_loss = loss_discriminator(d_real, d_fake)
    if not math.isfinite(d_loss):
        raise DivergenceError(iteration, {"d_loss": d_loss})
    optimizer.step()
    return d_loss


def train_gan(
    dataset: PairDataset,
    gspec: GeneratorSpec,
    dspec: DiscriminatorSpec,
    lcfg: LossConfig,
    tcfg: TrainConfig,
    *,
    generator: Optional[Network] = None,
    fx: Optional[FeatureExtractor] = None,
    stage: int = 1,
    log: Optional[LossLog] = None,
    run: Optional[RunDirectory] = None,
    progress: bool = False,
) -> Tuple[Network, Network]:
    """Train a generator stage against a discriminator.

    Each iteration takes ``tcfg.d_steps`` discriminator steps on the binary
    cross-entropy of real HR patches against generated ones, then one generator
    step on the content loss plus ``alpha`` times the adversarial loss. The
    discriminator's parameter gradients from the generator step are discarded.
    Discriminator steps run the generator in inference mode, and the generator
    step leaves the discriminator's running statistics alone.

    :param dataset: Aligned ×2 pairs
    :param gspec: The generator architecture
    :param dspec: The discriminator architecture
    :param lcfg: The loss weights
    :param tcfg: The training parameters
    :param generator: A pretrained generator; pretrained here when not given
    :param fx: The feature extractor of the content loss, defaulting to
        :func:`salsr.gan.models.default_feature_extractor`
    :param stage: The 1-based stage, which selects the seeds
    :param log: A loss log with :data:`LOSS_COLUMNS` to fill
    :param run: A run directory that receives checkpoints and sample grids
    :param progress: Whether to show a progress bar
    :returns: The trained generator and discriminator
    :raises ConfigError: if no generator is given and pretraining is disabled
    :raises DivergenceError: if any loss becomes non-finite
    """
    _check_dataset(dataset, gspec.channels)
    if dspec.channels != gspec.channels:
        raise ConfigError("the generator and the discriminator disagree on the channel count")
    if generator is None:
        if tcfg.pretrain_iters == 0:
            raise ConfigError("train_gan needs a pretrained generator or pretrain_iters > 0")
        generator = pretrain_generator(dataset, gspec, tcfg, stage=stage, run=run, progress=progress)
    if fx is None and lcfg.lambda_feat > 0:
        fx = default_feature_extractor(gspec.channels, seed=tcfg.seed)

    discriminator = build_discriminator(dspec, dataset.hr_size)
    init_params(discriminator, derive_seed(tcfg.seed, stage, _INIT_DISCRIMINATOR))
    g_optimizer = Adam(generator, lr=tcfg.gan_lr)
    d_optimizer = Adam(discriminator, lr=tcfg.gan_lr)
    rng = np.random.default_rng(derive_seed(tcfg.seed, stage, _GAN_BATCHES))

    for iteration in trange(
        1,
        tcfg.gan_iters + 1,
        desc=f"Adversarial stage {stage}",
        unit="iter",
        unit_scale=True,
        disable=not progress,
    ):
        for _ in range(tcfg.d_steps):
            lr_batch, hr_batch = dataset.batch(dataset.sample_indices(rng, tcfg.batch_size))
            d_loss = _discriminator_step(
                generator, discriminator, d_optimizer, lr_batch, hr_batch, iteration
            )

        indices = dataset.sample_indices(rng, tcfg.batch_size)
        lr_batch, hr_batch = dataset.batch(indices)
        sal_hr = dataset.saliency_batch(indices) if lcfg.lambda_wmse > 0 or lcfg.lambda_sal > 0 else None
        sr = generator.forward(lr_batch, mode="train")
        terms, grad = content_loss(hr_batch, sr, lcfg, fx=fx, sal_hr=sal_hr)
        gen = 0.0
        if lcfg.alpha > 0:
            discriminator.frozen = True
            try:
                d_out = discriminator.forward(sr, mode="train")
                if not np.all(np.isfinite(d_out)):
                    raise DivergenceError(iteration, {**terms._asdict(), "gen": math.nan, "d_loss": d_loss})
                gen = loss_generator_adv(d_out)
                grad = grad + discriminator.backward(lcfg.alpha * grad_generator_adv(d_out))
            finally:
                discriminator.frozen = False
        terms = terms._replace(gen=gen)
        total = total_generator_loss(terms, lcfg)
        if not (math.isfinite(total) and all(math.isfinite(t) for t in terms)):
            raise DivergenceError(iteration, {**terms._asdict(), "total": total, "d_loss": d_loss})
        generator.zero_grad()
        generator.backward(grad)
        g_optimizer.step()

        if log is not None:
            log.append(
                iter=iteration,
                l_wmse=terms.wmse,
                l_feat=terms.feat,
                l_sal=terms.sal,
                l_gen=terms.gen,
                l_total=total,
                d_loss=d_loss,
            )
        if iteration % tcfg.log_every == 0:
            logger.info(
                "stage %d iteration %d: wmse=%.5g feat=%.5g sal=%.5g gen=%.5g total=%.5g d=%.5g",
                stage,
                iteration,
                *terms,
                total,
                d_loss,
            )
        if run is not None and tcfg.sample_every and iteration % tcfg.sample_every == 0:
            _save_grid(_sample_grid(generator, dataset), run.sample_path(stage, iteration))
        if run is not None and tcfg.checkpoint_every and iteration % tcfg.checkpoint_every == 0:
            save_checkpoint(
                generator,
                run.checkpoint_path(stage, f"generator-{iteration:06d}"),
                adam_state=g_optimizer.state,
                metadata=_metadata("generator", gspec, stage, iteration),
            )

    if run is not None:
        save_checkpoint(
            generator,
            run.checkpoint_path(stage, "generator"),
            adam_state=g_optimizer.state,
            metadata=_metadata("generator", gspec, stage, tcfg.gan_iters),
        )
        save_checkpoint(
            discriminator,
            run.checkpoint_path(stage, "discriminator"),
            adam_state=d_optimizer.state,
            metadata=_metadata("discriminator", dspec, stage, tcfg.gan_iters),
        )
    return generator, discriminator


def _input_channels(net: Network) -> int:
    return net[0].in_channels


def _as_channels(image: Union[Plane, RgbImage, np.ndarray]) -> Tuple[np.ndarray, str]:
    if isinstance(image, RgbImage):
        return image.as_array(), "rgb"
    array = np.asarray(image, dtype=np.float64)
    if array.ndim == 2:
        return array[None], "plane"
    if array.ndim == 3 and array.shape[0] in (1, 3):
        return array, "array"
    raise ShapeError(f"expected a plane, an RGB image or a (c, h, w) array, got shape {array.shape}")


def super_resolve(
    stages: Sequence[Network],
    lr_img: Union[Plane, RgbImage, np.ndarray],
    r: int,
) -> Union[Plane, RgbImage, np.ndarray]:
    """Upscale an image by chaining ×2 generator stages.

    Gray generators process color images one channel at a time. The output is
    clamped to [0, 1] after every stage.

    :param stages: One generator per factor of two, applied first to last
    :param lr_img: A plane, an RGB image or a (c, h, w) array
    :param r: The scale factor
    :returns: The upscaled image, of the same kind as the input
    :raises StageCountError: if there are not exactly log2(r) stages
    :raises ShapeError: if a color generator gets a single-channel image
    """
    check_scale(r)
    expected = int(math.log2(r))
    if len(stages) != expected:
        raise StageCountError(r, expected, len(stages))
    array, kind = _as_channels(lr_img)
    for net in stages:
        channels = _input_channels(net)
        if channels == array.shape[0]:
            batch = array[None]
        elif channels == 1:
            batch = array[:, None]
        else:
            raise ShapeError(f"a {channels}-channel generator got a {array.shape[0]}-channel image")
        out = np.clip(net.forward(batch, mode="infer").astype(np.float64), 0.0, 1.0)
        array = out[0] if channels == array.shape[0] else out[:, 0]
    if kind == "rgb":
        return RgbImage.from_array(array)
    if kind == "plane":
        return array[0]
    return array


def train_cascade(
    make_dataset: Callable[[int], PairDataset],
    gspec: GeneratorSpec,
    dspec: DiscriminatorSpec,
    lcfg: LossConfig,
    tcfg: TrainConfig,
    *,
    run: Optional[RunDirectory] = None,
    fx: Optional[FeatureExtractor] = None,
    progress: bool = False,
) -> List[Network]:
    """Train ``tcfg.stages`` generator stages, each through both phases.

    :param make_dataset: Builds the ×2 pairs of a stage from its HR patch side length
    :param gspec: The architecture shared by all generator stages
    :param dspec: The architecture shared by all discriminators
    :param lcfg: The loss weights
    :param tcfg: The training parameters
    :param run: A run directory that receives loss logs, checkpoints and samples
    :param fx: The feature extractor of the content loss
    :param progress: Whether to show progress bars
    :returns: The trained generators, first stage first
    """
    generators = []
    for stage in range(1, tcfg.stages + 1):
        dataset = make_dataset(tcfg.stage_patch_size(stage))
        dataset = augment_pairs(dataset, tcfg.augment, seed=derive_seed(tcfg.seed, stage, _AUGMENT))
        logger.info("stage %d: training on %r", stage, dataset)
        pretrain_log = LossLog(
            PRETRAIN_COLUMNS, path=run.loss_log_path(stage, "pretrain") if run is not None else None
        )
        generator = pretrain_generator(
            dataset, gspec, tcfg, stage=stage, log=pretrain_log, run=run, progress=progress
        )
        gan_log = LossLog(LOSS_COLUMNS, path=run.loss_log_path(stage) if run is not None else None)
        generator, _ = train_gan(
            dataset,
            gspec,
            dspec,
            lcfg,
            tcfg,
            generator=generator,
            fx=fx,
            stage=stage,
            log=gan_log,
            run=run,
            progress=progress,
        )
        generators.append(generator)
    return generators
