"""Declarative run configuration for the pipeline CLI.

One YAML file describes an experiment; command-line flags override single
values on top (flags win). Geometry (class count, image size, channels),
the seed, and the determinism switch live at the top level and are injected
into the GAN and classifier sections so the stages can never disagree.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .cgan import GanConfig
from .classifier import SETUP_TAGS, ClassifierConfig

ENV_OUTPUT_ROOT = "GEMIX_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs/default"


class ConfigError(ValueError):
    """The run configuration is invalid; nothing was executed."""


@dataclass
class DataConfig:
    gan_per_class: int = 1000
    clf_per_class: int = 1000
    test_per_class: int = 200
    train_fraction: float = 0.8

    def __post_init__(self):
        for name in ("gan_per_class", "clf_per_class", "test_per_class"):
            if getattr(self, name) < 1:
                raise ConfigError(f"data.{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"data.train_fraction must be in (0, 1), got {self.train_fraction}")


@dataclass
class MixConfig:
    num_synthetic: int = 3000     # N generated/blended samples per augmentation source
    a_eq: float = 2.0
    a_neq: float = 1.0
    mixup_alpha: float = 1.0

    def __post_init__(self):
        if self.num_synthetic < 1:
            raise ConfigError(f"mix.num_synthetic must be >= 1, got {self.num_synthetic}")
        if not self.a_eq > self.a_neq > 0:
            raise ConfigError(
                f"mix concentrations must satisfy a_eq > a_neq > 0, got ({self.a_eq}, {self.a_neq})")
        if self.mixup_alpha <= 0:
            raise ConfigError(f"mix.mixup_alpha must be > 0, got {self.mixup_alpha}")


@dataclass
class RunConfig:
    seed: int = 0
    output_root: str = ""
    num_classes: int = 3
    image_size: int = 32
    channels: int = 1
    positive_class: int = 0
    deterministic: bool = True
    setups: list[str] = field(default_factory=lambda: list(SETUP_TAGS))
    data: DataConfig = field(default_factory=DataConfig)
    mix: MixConfig = field(default_factory=MixConfig)
    gan: GanConfig = field(default_factory=GanConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)


# keys accepted in the gan:/classifier: sections; geometry and seed are
# injected from the top level
_GAN_SECTION_KEYS = ("latent_dim", "batch_size", "steps", "lr_g", "lr_d",
                     "label_embed_dim", "base_channels")
_CLF_SECTION_KEYS = ("epochs", "batch_size", "learning_rate", "momentum", "backbone")
_TOP_KEYS = ("seed", "output_root", "num_classes", "image_size", "channels",
             "positive_class", "deterministic", "setups", "data", "mix", "gan", "classifier")


def _check_keys(section: dict, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown {where} keys: {unknown}; allowed: {sorted(allowed)}")


def build_config(raw: dict | None) -> RunConfig:
    """Construct and validate a RunConfig from a plain mapping."""
    raw = dict(raw or {})
    _check_keys(raw, _TOP_KEYS, "config")
    top = {name: raw.get(name, getattr(RunConfig, name, None))
           for name in ("seed", "num_classes", "image_size", "channels",
                        "positive_class", "deterministic")}
    try:
        data_section = dict(raw.get("data") or {})
        _check_keys(data_section, [f.name for f in fields(DataConfig)], "data")
        data = DataConfig(**data_section)

        mix_section = dict(raw.get("mix") or {})
        _check_keys(mix_section, [f.name for f in fields(MixConfig)], "mix")
        mix = MixConfig(**mix_section)

        gan_section = dict(raw.get("gan") or {})
        _check_keys(gan_section, _GAN_SECTION_KEYS, "gan")
        gan = GanConfig(image_size=top["image_size"], channels=top["channels"],
                        num_classes=top["num_classes"], seed=top["seed"],
                        deterministic=top["deterministic"], **gan_section)

        clf_section = dict(raw.get("classifier") or {})
        _check_keys(clf_section, _CLF_SECTION_KEYS, "classifier")
        classifier = ClassifierConfig(image_size=top["image_size"], channels=top["channels"],
                                      num_classes=top["num_classes"], seed=top["seed"],
                                      deterministic=top["deterministic"], **clf_section)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    setups = list(raw.get("setups") or SETUP_TAGS)
    unknown = [tag for tag in setups if tag not in SETUP_TAGS]
    if unknown:
        raise ConfigError(f"unknown setups {unknown}; available: {list(SETUP_TAGS)}")
    if top["num_classes"] < 1:
        raise ConfigError(f"num_classes must be >= 1, got {top['num_classes']}")
    if not 0 <= top["positive_class"] < top["num_classes"]:
        raise ConfigError(
            f"positive_class {top['positive_class']} outside [0, {top['num_classes']})")

    output_root = raw.get("output_root") or os.environ.get(ENV_OUTPUT_ROOT) or DEFAULT_OUTPUT_ROOT
    return RunConfig(seed=top["seed"], output_root=str(output_root),
                     num_classes=top["num_classes"], image_size=top["image_size"],
                     channels=top["channels"], positive_class=top["positive_class"],
                     deterministic=top["deterministic"], setups=setups,
                     data=data, mix=mix, gan=gan, classifier=classifier)


def load_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    """Load a YAML run config (all keys optional) and apply `key.path=value`
    overrides on top."""
    raw: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
        raw = loaded
    for item in overrides or []:
        _apply_override(raw, item)
    return build_config(raw)


def _apply_override(raw: dict, item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key.path=value")
    dotted, text = item.split("=", 1)
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {text!r}: {exc}") from exc
    node = raw
    parts = dotted.strip().split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {dotted!r} descends into a non-mapping value")
    node[parts[-1]] = value


@dataclass
class RunPaths:
    """The fixed output layout under one experiment root."""
    root: Path

    @property
    def data_gan(self) -> Path:
        return self.root / "data" / "gan"

    @property
    def data_clf(self) -> Path:
        return self.root / "data" / "clf"

    @property
    def data_test(self) -> Path:
        return self.root / "data" / "test"

    @property
    def checkpoint(self) -> Path:
        return self.root / "gan" / "checkpoint.pt"

    @property
    def gan_log(self) -> Path:
        return self.root / "gan" / "train_log.jsonl"

    def aug_dir(self, kind: str) -> Path:
        return self.root / "aug" / kind

    def model_dir(self, setup: str) -> Path:
        return self.root / "models" / setup

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    def report_path(self, setup: str) -> Path:
        return self.reports_dir / f"{setup}.json"


def run_paths(cfg: RunConfig) -> RunPaths:
    return RunPaths(root=Path(cfg.output_root))
