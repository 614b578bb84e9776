# -*- coding: utf-8 -*-

"""Loss-term and saliency-feature ablations on a shared held-out set.

Every arm starts from the same MSE-pretrained generator and differs only in
its loss weights or saliency fusion weight. Each arm, and a bicubic baseline,
is scored per held-out patch; the scores of every arm are compared to the
first arm's with the Wilcoxon signed-rank test.
"""

import copy
import csv
import dataclasses
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np
import yaml
from tqdm.auto import tqdm

from .degrade import bicubic_upscale
from .gan import (
    DiscriminatorSpec,
    GeneratorSpec,
    LossConfig,
    LossLog,
    PairDataset,
    RunDirectory,
    TrainConfig,
    pretrain_generator,
    super_resolve,
    train_gan,
)
from .imgcore import RgbImage
from .metrics import METRIC_COLUMNS, MetricsReport, evaluate_pair, read_report_csv, write_report_csv
from .nn import Network
from .stats import compare_tables
from .utils import ConfigError

__all__ = [
    "TERMS",
    "Arm",
    "ARMS",
    "BICUBIC",
    "arm_from_terms",
    "evaluate_stages",
    "evaluate_bicubic",
    "run_ablation",
    "summarize",
    "write_comparison_csv",
]

logger = logging.getLogger(__name__)

#: The content loss terms and their weight fields
TERMS = {"wmse": "lambda_wmse", "feat": "lambda_feat", "sal": "lambda_sal"}

#: The name of the baseline row
BICUBIC = "bicubic"


class Arm(NamedTuple):
    """One configuration of an ablation."""

    name: str
    #: Replacements of :class:`salsr.gan.LossConfig` fields
    loss: Mapping[str, Any] = {}
    #: Replacements of :class:`salsr.saliency.SaliencyConfig` fields
    saliency: Mapping[str, Any] = {}

    def apply(self, lcfg: LossConfig) -> LossConfig:
        """Get the loss configuration of this arm."""
        saliency = dataclasses.replace(lcfg.saliency, **self.saliency)
        return dataclasses.replace(lcfg, **self.loss, saliency=saliency)


#: The built-in arms; the first is the reference of the significance tests
ARMS: Dict[str, Arm] = {
    arm.name: arm
    for arm in [
        Arm("full"),
        Arm("no-feat", loss={"lambda_feat": 0.0}),
        Arm("no-sal", loss={"lambda_sal": 0.0}),
        Arm("curvature-only", saliency={"w1": 1.0}),
        Arm("entropy-only", saliency={"w1": 0.0}),
    ]
}


def arm_from_terms(terms: Iterable[str]) -> Arm:
    """Build an arm that keeps only some content terms, e.g. ``["wmse", "sal"]``.

    :raises ConfigError: if a term is unknown or none is given
    """
    terms = sorted(set(terms))
    unknown = set(terms) - set(TERMS)
    if unknown:
        raise ConfigError(f"unknown loss term(s) {', '.join(sorted(unknown))}; use {', '.join(TERMS)}")
    if not terms:
        raise ConfigError("an arm needs at least one content loss term")
    return Arm(
        name="+".join(terms),
        loss={weight: 0.0 for term, weight in TERMS.items() if term not in terms},
    )


def _as_image(array: np.ndarray) -> RgbImage:
    if array.shape[0] == 1:
        return RgbImage.from_gray(array[0])
    return RgbImage.from_array(array)


def _patch_name(index: int) -> str:
    return f"patch-{index:04d}"


def evaluate_stages(stages: Sequence[Network], heldout: PairDataset) -> List[MetricsReport]:
    """Score generator stages on every held-out pair."""
    reports = []
    for lr, hr in zip(heldout.lr, heldout.hr):
        sr = super_resolve(stages, lr, heldout.scale)
        reports.append(evaluate_pair(_as_image(hr), _as_image(sr), heldout.scale))
    return reports


def evaluate_bicubic(heldout: PairDataset) -> List[MetricsReport]:
    """Score bicubic upscaling on every held-out pair."""
    reports = []
    for lr, hr in zip(heldout.lr, heldout.hr):
        sr = np.stack([bicubic_upscale(plane, heldout.scale) for plane in lr])
        reports.append(evaluate_pair(_as_image(hr), _as_image(sr), heldout.scale))
    return reports


def _write_rows(reports: Sequence[MetricsReport], path: Path) -> None:
    write_report_csv([r.csv_row(_patch_name(i)) for i, r in enumerate(reports)], path, append=False)


def run_ablation(
    train: PairDataset,
    heldout: PairDataset,
    gspec: GeneratorSpec,
    dspec: DiscriminatorSpec,
    lcfg: LossConfig,
    tcfg: TrainConfig,
    arms: Sequence[Arm],
    directory: Union[str, Path],
    progress: bool = False,
) -> Dict[str, Any]:
    """Train one ×2 generator per arm and compare them on held-out pairs.

    :param train: The training pairs
    :param heldout: The evaluation pairs
    :param gspec: The generator architecture
    :param dspec: The discriminator architecture
    :param lcfg: The loss weights that the arms modify
    :param tcfg: The training parameters shared by all arms
    :param arms: The arms; the first is the reference of the significance tests
    :param directory: Receives one metrics CSV per arm and ``summary.yml``
    :param progress: Whether to show progress bars
    :returns: The summary: mean scores per arm and p-values against the first arm
    """
    if not arms:
        raise ConfigError("an ablation needs at least one arm")
    names = [arm.name for arm in arms]
    if len(set(names)) != len(names) or BICUBIC in names:
        raise ConfigError(f"arm names must be unique and not {BICUBIC!r}: {names}")
    directory = Path(directory)
    run = RunDirectory(directory)

    pretrained = pretrain_generator(train, gspec, tcfg, progress=progress)
    _write_rows(evaluate_bicubic(heldout), directory / f"{BICUBIC}.csv")
    for arm in tqdm(arms, desc="Ablation arms", unit="arm", disable=not progress):
        arm_lcfg = arm.apply(lcfg)
        arm_train = PairDataset(train.hr, train.scale, arm_lcfg.saliency, lr=train.lr)
        logger.info("training arm %s", arm.name)
        generator, _ = train_gan(
            arm_train,
            gspec,
            dspec,
            arm_lcfg,
            tcfg,
            generator=copy.deepcopy(pretrained),
            log=LossLog(path=run.root / arm.name / "losses.csv"),
            progress=progress,
        )
        _write_rows(evaluate_stages([generator], heldout), directory / f"{arm.name}.csv")

    summary = summarize(directory, [*names, BICUBIC], reference=names[0])
    with directory.joinpath("summary.yml").open("w") as file:
        yaml.safe_dump(summary, file, indent=2, sort_keys=True)
    write_comparison_csv(summary, directory / "comparison.csv")
    return summary


def summarize(
    directory: Union[str, Path],
    names: Sequence[str],
    reference: Optional[str] = None,
) -> Dict[str, Any]:
    """Summarize per-arm metrics CSV files.

    :param directory: The directory holding ``<name>.csv`` for each name
    :param names: The arms to summarize, including the baseline
    :param reference: The arm the others are tested against, defaulting to the first
    :returns: Mean scores by arm, and Wilcoxon results by arm and metric
    """
    directory = Path(directory)
    reference = reference or names[0]
    tables = {name: read_report_csv(directory / f"{name}.csv") for name in names}
    rv: Dict[str, Any] = {"reference": reference, "means": {}, "wilcoxon": {}}
    for name, rows in tables.items():
        rv["means"][name] = {
            column: float(np.mean([row[column] for row in rows])) for column in METRIC_COLUMNS
        }
        if name == reference:
            continue
        results = compare_tables(tables[reference], rows, METRIC_COLUMNS)
        rv["wilcoxon"][name] = {
            column: {"w": result.w_statistic, "p": result.p_two_sided, "n": result.n}
            for column, result in results.items()
        }
    return rv


def write_comparison_csv(summary: Mapping[str, Any], path: Union[str, Path]) -> Path:
    """Write one row per arm with its mean scores and p-values against the reference arm."""
    path = Path(path)
    header = ["arm", *METRIC_COLUMNS, *(f"p_{column}" for column in METRIC_COLUMNS)]
    with path.open("w", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(header)
        for name, means in summary["means"].items():
            tests = summary["wilcoxon"].get(name, {})
            writer.writerow(
                [
                    name,
                    *(repr(means[column]) for column in METRIC_COLUMNS),
                    *(repr(tests[column]["p"]) if column in tests else "" for column in METRIC_COLUMNS),
                ]
            )
    return path
