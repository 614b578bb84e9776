# -*- coding: utf-8 -*-

"""Run every ablation arm at desk scale on synthetic vessel patches and print the comparison."""

import logging
from pathlib import Path
from typing import Optional

import click
from more_click import verbose_option

from salsr.ablation import ARMS, run_ablation
from salsr.config import resolve_config
from salsr.gan import PairDataset, synthetic_patches
from salsr.utils import get_runs_directory

logger = logging.getLogger(__name__)


@click.command()
@click.option("--patches", type=int, default=200, show_default=True, help="Training patches")
@click.option("--holdout", type=int, default=50, show_default=True, help="Held-out patches")
@click.option("--gan-iters", type=int, help="Override the preset's adversarial iterations")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path))
@verbose_option
def main(patches: int, holdout: int, gan_iters: Optional[int], seed: int, output_dir: Optional[Path]):
    """Compare the full loss, its ablations, and bicubic upscaling."""
    train_overrides = {"seed": seed}
    if gan_iters is not None:
        train_overrides["gan_iters"] = gan_iters
    cfg = resolve_config(preset="toy", overrides={"train": train_overrides}, command="toy_experiment")
    dataset = PairDataset(
        synthetic_patches(patches + holdout, cfg.train.patch_size, seed=seed),
        saliency=cfg.saliency,
    )
    train, heldout = dataset.split(holdout)
    directory = output_dir or get_runs_directory("toy-experiment", f"seed-{seed}")
    cfg.snapshot(directory)
    logger.info("training %d arms on %d patches in %s", len(ARMS), len(train), directory)
    summary = run_ablation(
        train,
        heldout,
        cfg.generator,
        cfg.discriminator,
        cfg.loss,
        cfg.train,
        list(ARMS.values()),
        directory,
        progress=True,
    )
    for name, means in summary["means"].items():
        click.echo(f"{name:>15}: " + "  ".join(f"{k}={v:.4f}" for k, v in sorted(means.items())))
    for name, tests in summary["wilcoxon"].items():
        p_values = "  ".join(f"p_{k}={v['p']:.3g}" for k, v in sorted(tests.items()))
        click.echo(f"{name:>15} vs {summary['reference']}: {p_values}")


if __name__ == "__main__":
    main()
