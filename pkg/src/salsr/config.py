# -*- coding: utf-8 -*-

"""Layered run configuration: dataclass defaults, presets, config files, and command-line flags.

Each configuration section is a frozen dataclass. The effective value of a
field is the first of, from highest to lowest precedence, an explicit
command-line flag, the ``--config`` file, the ``--preset``, and the
dataclass default.
"""

import dataclasses
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Type, Union

import click
import yaml

from .gan import DiscriminatorSpec, GeneratorSpec, LossConfig, RunDirectory, TrainConfig
from .resources import get_preset_names, load_preset
from .saliency import SaliencyConfig
from .utils import ConfigError, ImageIOError

__all__ = [
    "SECTIONS",
    "RunConfig",
    "section_options",
    "collect_overrides",
    "read_config_file",
    "resolve_config",
    "config_file_option",
]

logger = logging.getLogger(__name__)

#: Configuration sections, their dataclasses, and the prefix of their flags
SECTIONS: Dict[str, Tuple[Type, str]] = {
    "saliency": (SaliencyConfig, ""),
    "generator": (GeneratorSpec, "g-"),
    "discriminator": (DiscriminatorSpec, "d-"),
    "loss": (LossConfig, ""),
    "train": (TrainConfig, ""),
}

#: Fields that are not exposed as flags, by section
HIDDEN_FIELDS = {
    "generator": {"upscale_per_stage", "channels"},
    "discriminator": {"n_conv_layers", "channels"},
    "loss": {"saliency"},
}

_SEPARATOR = "__"


def _flag_fields(section: str):
    cls, _ = SECTIONS[section]
    hidden = HIDDEN_FIELDS.get(section, set())
    return [f for f in dataclasses.fields(cls) if f.name not in hidden]


def _click_type(f: dataclasses.Field):
    if f.type in (int, "int"):
        return int
    if f.type in (float, "float"):
        return float
    return str


def section_options(*sections: str) -> Callable:
    """Build a decorator that adds one option per field of the given sections.

    Options default to None so that only explicitly given flags override the
    lower configuration layers; the help text shows the built-in default.
    """

    def _decorator(func):
        for section in reversed(sections):
            _, prefix = SECTIONS[section]
            for f in reversed(_flag_fields(section)):
                flag = "--" + prefix + f.name.replace("_", "-")
                func = click.option(
                    flag,
                    f"{section}{_SEPARATOR}{f.name}",
                    type=_click_type(f),
                    default=None,
                    help=f"{section}.{f.name} [default: {_default(f)}]",
                )(func)
        return func

    return _decorator


def _default(f: dataclasses.Field) -> Any:
    if f.default is not dataclasses.MISSING:
        return f.default
    return f.default_factory()  # type:ignore


def collect_overrides(kwargs: Dict[str, Any]) -> Dict[str, Dict[str, Any]]:
    """Pop the section flags out of a command's keyword arguments.

    :param kwargs: The keyword arguments click passed to the command, modified in place
    :returns: The explicitly given values by section and field
    """
    rv: Dict[str, Dict[str, Any]] = {}
    for key in [key for key in kwargs if _SEPARATOR in key]:
        value = kwargs.pop(key)
        if value is None:
            continue
        section, name = key.split(_SEPARATOR, 1)
        rv.setdefault(section, {})[name] = value
    return rv


def read_config_file(path: Union[str, Path]) -> Dict[str, Dict[str, Any]]:
    """Read a YAML or JSON configuration file with one mapping per section.

    :raises ImageIOError: if the file can not be read
    :raises ConfigError: if the file is not a mapping of mappings
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ImageIOError(f"can not read config file {path}: {e}") from e
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"config file {path} is not valid YAML or JSON: {e}") from e
    if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
        raise ConfigError(f"config file {path} must map section names to mappings")
    return data


def _merge(layers) -> Dict[str, Dict[str, Any]]:
    rv: Dict[str, Dict[str, Any]] = {section: {} for section in SECTIONS}
    for layer in layers:
        for section, values in layer.items():
            if section not in SECTIONS:
                raise ConfigError(f"unknown config section {section!r}")
            rv[section].update(values)
    return rv


def _build(section: str, values: Mapping[str, Any], **extra):
    cls, _ = SECTIONS[section]
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"unknown {section} field(s): {', '.join(sorted(unknown))}")
    try:
        return cls(**values, **extra)
    except TypeError as e:
        raise ConfigError(f"invalid {section} configuration: {e}") from e


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """The effective configuration of one command invocation."""

    saliency: SaliencyConfig = dataclasses.field(default_factory=SaliencyConfig)
    generator: GeneratorSpec = dataclasses.field(default_factory=GeneratorSpec)
    discriminator: DiscriminatorSpec = dataclasses.field(default_factory=DiscriminatorSpec)
    loss: LossConfig = dataclasses.field(default_factory=LossConfig)
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    #: The command that produced this configuration
    command: str = ""
    #: Command-specific values such as input and output paths
    parameters: Dict[str, Any] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.generator.channels != self.discriminator.channels:
            raise ConfigError("the generator and the discriminator disagree on the channel count")

    @property
    def seed(self) -> int:
        """The seed of every random choice in the run."""
        return self.train.seed

    def to_dict(self) -> Dict[str, Any]:
        """Convert to nested JSON-ready dictionaries."""
        rv = dataclasses.asdict(self)
        rv["loss"].pop("saliency")
        return rv

    def snapshot(self, directory: Union[str, Path]) -> Path:
        """Write ``config.json`` with this configuration into a directory."""
        return RunDirectory(directory).write_config(self.to_dict())


def resolve_config(
    *,
    preset: Optional[str] = None,
    config_path: Union[None, str, Path] = None,
    overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
    channels: int = 1,
    command: str = "",
    parameters: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Combine the configuration layers into the effective configuration.

    :param preset: The name of a packaged preset
    :param config_path: A YAML or JSON config file
    :param overrides: Explicit values by section and field, e.g. from :func:`collect_overrides`
    :param channels: The image channels of the networks
    :param command: The command name recorded in the snapshot
    :param parameters: Command-specific values recorded in the snapshot
    :raises ConfigError: on unknown presets, sections or fields, or invalid values
    """
    layers = []
    if preset is not None:
        layers.append(load_preset(preset))
    if config_path is not None:
        layers.append(read_config_file(config_path))
    if overrides:
        layers.append(overrides)
    merged = _merge(layers)
    for section in ("generator", "discriminator"):
        merged[section].setdefault("channels", channels)
    saliency = _build("saliency", merged["saliency"])
    logger.debug("resolved %s configuration from %d layers", command or "a", len(layers))
    return RunConfig(
        saliency=saliency,
        generator=_build("generator", merged["generator"]),
        discriminator=_build("discriminator", merged["discriminator"]),
        loss=_build("loss", merged["loss"], saliency=saliency),
        train=_build("train", merged["train"]),
        command=command,
        parameters=dict(parameters or {}),
    )


def config_file_option(func):
    """Add the ``--preset`` and ``--config`` options."""
    func = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        help="A YAML or JSON file with one mapping per section",
    )(func)
    return click.option(
        "--preset",
        type=click.Choice(get_preset_names()),
        help="A packaged preset below the config file and the flags",
    )(func)
