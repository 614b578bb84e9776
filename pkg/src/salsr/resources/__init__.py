# -*- coding: utf-8 -*-

"""Configuration presets shipped with :mod:`salsr`."""

import logging
from functools import lru_cache
from typing import Any, Dict, List

import yaml

from ..utils import RESOURCE_PATH, ConfigError

__all__ = [
    "PRESETS_PATH",
    "get_preset_names",
    "load_preset",
]

logger = logging.getLogger(__name__)

PRESETS_PATH = RESOURCE_PATH


def get_preset_names() -> List[str]:
    """List the names of the packaged presets."""
    return sorted(path.stem for path in PRESETS_PATH.glob("*.yml"))


@lru_cache(maxsize=None)
def _read_preset(name: str) -> Dict[str, Any]:
    path = PRESETS_PATH.joinpath(f"{name}.yml")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(get_preset_names())}")
    logger.debug("loading preset %s from %s", name, path)
    with path.open() as file:
        return yaml.safe_load(file) or {}


def load_preset(name: str) -> Dict[str, Dict[str, Any]]:
    """Load a preset as a mapping from section name to field overrides.

    :param name: The preset name, e.g. ``toy`` or ``full``
    :returns: A fresh copy, safe to modify
    :raises ConfigError: if there is no such preset
    """
    return {section: dict(values) for section, values in _read_preset(name).items()}
