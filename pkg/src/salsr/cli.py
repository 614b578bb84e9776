# -*- coding: utf-8 -*-

"""The salsr CLI.

Every command exits with 0 on success, 2 for configuration errors, 3 for I/O
errors, 4 for shape errors and 5 when training diverges.
"""

import json
import logging
import math
import sys
from functools import wraps
from pathlib import Path
from typing import List, Optional

import click
from more_click import verbose_option

from .config import collect_overrides, config_file_option, resolve_config, section_options
from .degrade import SCALE_FACTORS, bicubic_upscale, degradation_metadata, make_lr
from .imgcore import load_image, save_image, save_plane, select_channel, write_raw_map
from .utils import ConfigError, ImageIOError, SalsrError, StageCountError, get_runs_directory

__all__ = [
    "main",
]

logger = logging.getLogger(__name__)

CHANNELS = ["luma", "red", "green", "blue"]

scale_option = click.option(
    "--scale",
    type=click.Choice([str(r) for r in SCALE_FACTORS]),
    default="2",
    show_default=True,
    help="The super-resolution factor",
)
channel_option = click.option(
    "--channel",
    type=click.Choice(CHANNELS),
    default="luma",
    show_default=True,
    help="The image channel to analyze",
)
progress_option = click.option(
    "--progress/--no-progress", default=True, show_default=True, help="Show progress bars"
)


def handle_errors(func):
    """Report library errors in red and exit with their exit code."""

    @wraps(func)
    def _wrapped(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SalsrError as e:
            click.secho(f"{type(e).__name__}: {e}", fg="red", err=True)
            sys.exit(e.exit_code)

    return _wrapped


@click.group()
@click.version_option()
@verbose_option
def main():
    """Run saliency-guided super-resolution experiments."""


@main.command()
@click.argument("image", type=click.Path(path_type=Path))
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), help="Where maps go")
@channel_option
@config_file_option
@section_options("saliency")
@handle_errors
def saliency(image: Path, output_dir: Optional[Path], channel: str, preset, config_path, **kwargs):
    """Compute the saliency map of an image and its intermediate maps."""
    from .saliency import saliency_components

    cfg = resolve_config(
        preset=preset,
        config_path=config_path,
        overrides=collect_overrides(kwargs),
        command="saliency",
        parameters={"image": str(image), "channel": channel},
    )
    plane = select_channel(load_image(image), channel)
    components = saliency_components(plane, cfg.saliency)
    output_dir = output_dir or get_runs_directory("saliency", image.stem)
    output_dir.mkdir(parents=True, exist_ok=True)
    renderings = {
        "curvature": components.curvature,
        "compactness": components.compactness,
        "saliency": components.saliency,
    }
    for name, plane in renderings.items():
        save_plane(plane, output_dir / f"{name}.png", mode="heatmap")
    for name, plane in components._asdict().items():
        write_raw_map(plane, output_dir / f"{name}.map")
    cfg.snapshot(output_dir)
    click.echo(f"wrote saliency maps to {output_dir}")


@main.command()
@click.argument("image", type=click.Path(path_type=Path))
@scale_option
@click.option("--output", type=click.Path(dir_okay=False, path_type=Path), help="The LR image path")
@click.option("--crop", is_flag=True, help="Crop the image to a multiple of the scale first")
@handle_errors
def degrade(image: Path, scale: str, output: Optional[Path], crop: bool):
    """Synthesize a low-resolution image and a JSON sidecar with its parameters."""
    r = int(scale)
    hr = load_image(image)
    if crop:
        height, width = hr.height - hr.height % r, hr.width - hr.width % r
        hr = hr.map(lambda plane: plane[:height, :width])
    output = output or image.with_name(f"{image.stem}_x{r}.png")
    save_image(make_lr(hr, r), output)
    sidecar = output.with_suffix(output.suffix + ".json")
    metadata = {"source": image.name, **degradation_metadata(r)}
    sidecar.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {output} and {sidecar}")


def _dataset_factory(data: Optional[Path], synthetic: Optional[int], channel: str, cfg, scale: int = 2):
    from .gan import PairDataset, load_directory, synthetic_patches

    if (data is None) == (synthetic is None):
        raise ConfigError("give exactly one of --data and --synthetic")
    if data is not None:

        def _make(patch_size: int):
            return load_directory(data, patch_size, scale=scale, channel=channel, saliency=cfg.saliency)

    else:
        channels = 3 if channel == "rgb" else 1

        def _make(patch_size: int):
            hr = synthetic_patches(synthetic, patch_size, seed=cfg.seed, channels=channels)
            return PairDataset(hr, scale=scale, saliency=cfg.saliency)

    return _make


data_option = click.option(
    "--data",
    type=click.Path(file_okay=False, path_type=Path),
    help="A directory of PNG/PPM/PGM training images",
)
synthetic_option = click.option(
    "--synthetic", type=int, help="Train on this many synthetic vessel patches instead"
)
train_channel_option = click.option(
    "--channel",
    type=click.Choice([*CHANNELS, "rgb"]),
    default="luma",
    show_default=True,
    help="The channel the networks see; rgb trains color networks",
)


@main.command()
@data_option
@synthetic_option
@train_channel_option
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), help="The run directory")
@progress_option
@config_file_option
@section_options("saliency", "generator", "discriminator", "loss", "train")
@handle_errors
def train(
    data: Optional[Path],
    synthetic: Optional[int],
    channel: str,
    output_dir: Optional[Path],
    progress: bool,
    preset,
    config_path,
    **kwargs,
):
    """Train cascaded ×2 generator stages: MSE pretraining, then adversarial training."""
    from .gan import RunDirectory, train_cascade

    cfg = resolve_config(
        preset=preset,
        config_path=config_path,
        overrides=collect_overrides(kwargs),
        channels=3 if channel == "rgb" else 1,
        command="train",
        parameters={
            "data": None if data is None else str(data),
            "synthetic": synthetic,
            "channel": channel,
        },
    )
    make_dataset = _dataset_factory(data, synthetic, channel, cfg)
    run = RunDirectory(output_dir or get_runs_directory("train", f"seed-{cfg.seed}"))
    cfg.snapshot(run.root)
    generators = train_cascade(
        make_dataset,
        cfg.generator,
        cfg.discriminator,
        cfg.loss,
        cfg.train,
        run=run,
        progress=progress,
    )
    click.echo(f"trained {len(generators)} stage(s) in {run.root}")


def _stage_paths(stages: Optional[str], run_dir: Optional[Path]) -> List[Path]:
    from .gan import RunDirectory

    if stages:
        return [Path(part) for part in stages.split(",") if part]
    if run_dir is not None:
        if not run_dir.is_dir():
            raise ImageIOError(f"run directory {run_dir} does not exist")
        return RunDirectory(run_dir).generator_paths()
    return []


@main.command()
@click.argument("image", type=click.Path(path_type=Path))
@scale_option
@click.option("--stages", help="Comma-separated generator checkpoints, first stage first")
@click.option("--run", "run_dir", type=click.Path(path_type=Path), help="A training run directory")
@click.option(
    "--method",
    type=click.Choice(["gan", "bicubic"]),
    default="gan",
    show_default=True,
    help="Upscale with the generator stages or with bicubic interpolation",
)
@click.option("--output", type=click.Path(dir_okay=False, path_type=Path), help="The SR image path")
@handle_errors
def sr(
    image: Path,
    scale: str,
    stages: Optional[str],
    run_dir: Optional[Path],
    method: str,
    output: Optional[Path],
):
    """Super-resolve an image."""
    from .gan import super_resolve
    from .nn import network_from_checkpoint

    r = int(scale)
    lr = load_image(image)
    if method == "bicubic":
        result = bicubic_upscale(lr, r)
    else:
        paths = _stage_paths(stages, run_dir)
        if len(paths) != int(math.log2(r)):
            raise StageCountError(r, int(math.log2(r)), len(paths))
        networks = [network_from_checkpoint(path, mode="infer")[0] for path in paths]
        result = super_resolve(networks, lr, r)
    output = output or image.with_name(f"{image.stem}_sr_x{r}.png")
    save_image(result, output)
    click.echo(f"wrote {output}")


def _image_pairs(hr: Path, sr: Path):
    from .gan.data import IMAGE_SUFFIXES

    if hr.is_dir() and sr.is_dir():
        for hr_path in sorted(p for p in hr.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
            sr_path = sr / hr_path.name
            if sr_path.is_file():
                yield hr_path.name, hr_path, sr_path
            else:
                logger.warning("no super-resolved image for %s", hr_path.name)
    elif hr.is_dir() or sr.is_dir():
        raise ConfigError("--hr and --sr must both be files or both be directories")
    else:
        yield sr.name, hr, sr


@main.command(name="eval")
@click.option("--hr", type=click.Path(path_type=Path), help="The ground truth image or directory")
@click.option("--sr", type=click.Path(path_type=Path), help="The super-resolved image or directory")
@scale_option
@channel_option
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False, path_type=Path), help="Append rows here")
@click.option(
    "--compare",
    nargs=2,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Compare two per-image score CSV files with the Wilcoxon signed-rank test",
)
@handle_errors
def evaluate(hr: Optional[Path], sr: Optional[Path], scale: str, channel: str, csv_path, compare):
    """Score super-resolved images, or compare two score tables."""
    from .metrics import METRIC_COLUMNS, evaluate_pair, read_report_csv, write_report_csv
    from .stats import compare_tables

    if compare:
        a, b = (read_report_csv(path) for path in compare)
        for column, result in compare_tables(a, b, METRIC_COLUMNS).items():
            click.echo(json.dumps({"metric": column, **result._asdict()}, sort_keys=True))
        return
    if hr is None or sr is None:
        raise ConfigError("give --hr and --sr, or --compare")
    r = int(scale)
    rows = []
    single = not hr.is_dir()
    for name, hr_path, sr_path in _image_pairs(hr, sr):
        report = evaluate_pair(load_image(hr_path), load_image(sr_path), r, channel=channel)
        if single:
            click.echo(report.to_json())
        else:
            click.echo(json.dumps({"image": name, **report.to_dict()}, sort_keys=True))
        rows.append(report.csv_row(name))
    if csv_path is not None:
        write_report_csv(rows, csv_path)


@main.command()
@data_option
@synthetic_option
@click.option("--holdout", type=int, default=50, show_default=True, help="Held-out patches")
@click.option("--terms", help="Comma-separated content terms of a single arm against the full loss")
@click.option(
    "--arm",
    "arm_names",
    multiple=True,
    type=click.Choice(["full", "no-feat", "no-sal", "curvature-only", "entropy-only"]),
    help="Built-in arms to run; all of them by default",
)
@click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), help="The output directory")
@progress_option
@config_file_option
@section_options("saliency", "generator", "discriminator", "loss", "train")
@handle_errors
def ablate(
    data: Optional[Path],
    synthetic: Optional[int],
    holdout: int,
    terms: Optional[str],
    arm_names,
    output_dir: Optional[Path],
    progress: bool,
    preset,
    config_path,
    **kwargs,
):
    """Compare loss-term and saliency-feature ablations on held-out patches."""
    from .ablation import ARMS, arm_from_terms, run_ablation

    cfg = resolve_config(
        preset=preset,
        config_path=config_path,
        overrides=collect_overrides(kwargs),
        command="ablate",
        parameters={
            "data": None if data is None else str(data),
            "synthetic": None if synthetic is None else synthetic + holdout,
            "holdout": holdout,
            "terms": terms,
            "arms": list(arm_names),
        },
    )
    if terms:
        arms = [ARMS["full"], arm_from_terms(terms.split(","))]
    else:
        arms = [ARMS[name] for name in arm_names] if arm_names else list(ARMS.values())
    make_dataset = _dataset_factory(data, None if synthetic is None else synthetic + holdout, "luma", cfg)
    train_set, heldout = make_dataset(cfg.train.patch_size).split(holdout)
    directory = output_dir or get_runs_directory("ablate", f"seed-{cfg.seed}")
    cfg.snapshot(directory)
    summary = run_ablation(
        train_set,
        heldout,
        cfg.generator,
        cfg.discriminator,
        cfg.loss,
        cfg.train,
        arms,
        directory,
        progress=progress,
    )
    for name, means in summary["means"].items():
        click.echo(f"{name}: " + ", ".join(f"{k}={v:.4f}" for k, v in sorted(means.items())))
    click.echo(f"wrote {directory / 'comparison.csv'}")


if __name__ == "__main__":
    main()
