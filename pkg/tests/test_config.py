# -*- coding: utf-8 -*-

"""Tests for layered run configuration."""

import json
import tempfile
import unittest
from pathlib import Path

import click
from click.testing import CliRunner

from salsr.config import RunConfig, collect_overrides, read_config_file, resolve_config, section_options
from salsr.resources import get_preset_names, load_preset
from salsr.utils import ConfigError, ImageIOError


class TestPresets(unittest.TestCase):
    """Tests for the packaged presets."""

    def test_names(self):
        """Test that the toy and full presets are packaged."""
        self.assertEqual(["full", "toy"], get_preset_names())

    def test_resolvable(self):
        """Test that every preset resolves to a valid configuration."""
        for name in get_preset_names():
            with self.subTest(preset=name):
                cfg = resolve_config(preset=name)
                self.assertIsInstance(cfg, RunConfig)

    def test_copy(self):
        """Test that loaded presets can be modified without side effects."""
        preset = load_preset("toy")
        preset["train"]["patch_size"] = 1000
        self.assertEqual(32, load_preset("toy")["train"]["patch_size"])

    def test_unknown(self):
        """Test that unknown presets are rejected."""
        with self.assertRaises(ConfigError):
            load_preset("huge")


class TestResolve(unittest.TestCase):
    """Tests for :func:`resolve_config`."""

    def setUp(self) -> None:
        """Write a config file into a temporary directory."""
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)
        self.path = self.root / "config.yml"
        self.path.write_text("generator:\n  base_channels: 12\ntrain:\n  batch_size: 3\n  seed: 7\n")

    def tearDown(self) -> None:
        """Remove the temporary directory."""
        self.directory.cleanup()

    def test_defaults(self):
        """Test that without layers the dataclass defaults apply."""
        self.assertEqual(RunConfig(), resolve_config())

    def test_precedence(self):
        """Test that flags beat the config file, which beats the preset."""
        cfg = resolve_config(
            preset="toy",
            config_path=self.path,
            overrides={"train": {"batch_size": 5}},
        )
        self.assertEqual(5, cfg.train.batch_size)
        self.assertEqual(12, cfg.generator.base_channels)
        self.assertEqual(2, cfg.generator.n_residual_blocks)
        self.assertEqual(32, cfg.train.patch_size)
        self.assertEqual(7, cfg.seed)

    def test_saliency_shared(self):
        """Test that the loss uses the resolved saliency configuration."""
        cfg = resolve_config(overrides={"saliency": {"w1": 0.9}})
        self.assertEqual(0.9, cfg.loss.saliency.w1)

    def test_channels(self):
        """Test that the networks get the requested channel count."""
        cfg = resolve_config(channels=3)
        self.assertEqual(3, cfg.generator.channels)
        self.assertEqual(3, cfg.discriminator.channels)

    def test_unknown(self):
        """Test that unknown sections and fields are rejected."""
        with self.assertRaises(ConfigError):
            resolve_config(overrides={"optimizer": {"lr": 1.0}})
        with self.assertRaises(ConfigError):
            resolve_config(overrides={"train": {"learning_rate": 1.0}})
        with self.assertRaises(ConfigError):
            resolve_config(overrides={"train": {"batch_size": 0}})

    def test_read_errors(self):
        """Test unreadable, malformed, and badly shaped config files."""
        with self.assertRaises(ImageIOError):
            read_config_file(self.root / "missing.yml")
        malformed = self.root / "malformed.yml"
        malformed.write_text("train: [unclosed\n")
        with self.assertRaises(ConfigError):
            read_config_file(malformed)
        flat = self.root / "flat.json"
        flat.write_text(json.dumps({"train": 3}))
        with self.assertRaises(ConfigError):
            read_config_file(flat)
        empty = self.root / "empty.yml"
        empty.write_text("")
        self.assertEqual({}, read_config_file(empty))

    def test_snapshot(self):
        """Test the JSON snapshot of a configuration."""
        cfg = resolve_config(config_path=self.path, command="train", parameters={"synthetic": 4})
        rv = cfg.to_dict()
        self.assertNotIn("saliency", rv["loss"])
        self.assertEqual(12, rv["generator"]["base_channels"])
        path = cfg.snapshot(self.root / "run")
        data = json.loads(path.read_text())
        self.assertEqual("train", data["command"])
        self.assertEqual({"synthetic": 4}, data["parameters"])
        self.assertEqual(7, data["train"]["seed"])
        self.assertIn("version", data)


class TestOptions(unittest.TestCase):
    """Tests for the generated command-line options."""

    def test_flags(self):
        """Test that only explicitly given flags become overrides."""

        @click.command()
        @section_options("generator", "train")
        def _command(**kwargs):
            click.echo(json.dumps(collect_overrides(kwargs), sort_keys=True))
            click.echo(json.dumps(sorted(kwargs)))

        result = CliRunner().invoke(_command, ["--g-base-channels", "8", "--pretrain-lr", "0.5"])
        self.assertEqual(0, result.exit_code, msg=result.output)
        overrides, remaining = result.output.splitlines()
        self.assertEqual({"generator": {"base_channels": 8}, "train": {"pretrain_lr": 0.5}}, json.loads(overrides))
        self.assertEqual([], json.loads(remaining))

        result = CliRunner().invoke(_command, ["--help"])
        self.assertIn("--g-n-residual-blocks", result.output)
        self.assertNotIn("--g-channels", result.output)
