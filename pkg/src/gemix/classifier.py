"""Soft-label classifier: regime assembly, training, prediction, and
penultimate-feature export.

Every training regime feeds one loss, the soft cross-entropy
-sum_j ell_j log p_j; real samples participate as one-hot soft labels.
The default backbone is a small CNN (three conv/pool blocks, global average
pooling, linear head) so desk-scale runs finish in minutes; other backbones
can be registered behind the same interface.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import LabeledSample
from .cgan import CheckpointFormatError, TrainingDivergedError

MODEL_FORMAT_VERSION = 1
MODEL_KIND = "gemix-classifier"

PROB_EPS = 1e-12

# The eight training regimes: which sources they draw on and at which of the
# three count roles (real pool size, per-source size in two-source combos,
# per-source size in the three-source combo).
SETUP_TAGS = ("Real", "Mixup", "MMixup", "GeMix",
              "Real+Mixup", "Real+MMixup", "Real+GeMix", "Real+MMixup+GeMix")


@dataclass
class TrainingSetup:
    tag: str
    components: dict[str, int]    # source name -> exact sample count


def standard_setups(real_n: int, combo_n: int) -> dict[str, TrainingSetup]:
    """The eight regimes. Single-source regimes use real_n samples, two-source
    combos add combo_n augmented samples, and the three-source combo uses
    real_n from each source."""
    if real_n < 1 or combo_n < 1:
        raise ValueError(f"counts must be >= 1, got real_n={real_n}, combo_n={combo_n}")
    return {
        "Real": TrainingSetup("Real", {"real": real_n}),
        "Mixup": TrainingSetup("Mixup", {"mixup": real_n}),
        "MMixup": TrainingSetup("MMixup", {"mmixup": real_n}),
        "GeMix": TrainingSetup("GeMix", {"gemix": real_n}),
        "Real+Mixup": TrainingSetup("Real+Mixup", {"real": real_n, "mixup": combo_n}),
        "Real+MMixup": TrainingSetup("Real+MMixup", {"real": real_n, "mmixup": combo_n}),
        "Real+GeMix": TrainingSetup("Real+GeMix", {"real": real_n, "gemix": combo_n}),
        "Real+MMixup+GeMix": TrainingSetup(
            "Real+MMixup+GeMix", {"real": real_n, "mmixup": real_n, "gemix": real_n}),
    }


def assemble_training_set(setup: TrainingSetup,
                          real: list[LabeledSample] | None = None,
                          mixup_data: list[LabeledSample] | None = None,
                          mmixup_data: list[LabeledSample] | None = None,
                          gemix_data: list[LabeledSample] | None = None,
                          rng: np.random.Generator | None = None) -> list[LabeledSample]:
    """Concatenate the regime's sources at their exact counts, then shuffle.

    Takes the first `count` samples of each source (sources are already
    randomized upstream); `rng` shuffles the concatenation.
    """
    pools = {"real": real, "mixup": mixup_data, "mmixup": mmixup_data, "gemix": gemix_data}
    out: list[LabeledSample] = []
    for source, count in setup.components.items():
        pool = pools.get(source)
        if pool is None:
            raise ValueError(f"setup {setup.tag!r} requires source {source!r}, which was not provided")
        if len(pool) < count:
            raise ValueError(
                f"setup {setup.tag!r} requires {count} samples from {source!r}, got {len(pool)}")
        out.extend(pool[:count])
    if rng is not None:
        order = rng.permutation(len(out))
        out = [out[i] for i in order]
    return out


# ---------------------------------------------------------------------------
# soft cross-entropy

def soft_cross_entropy(pred_probs, target) -> float:
    """-sum_j ell_j log p_j, with probabilities clamped at 1e-12.

    Accepts single vectors or (n, K) batches; batches return the mean loss.
    """
    p = np.asarray(pred_probs, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"prediction shape {p.shape} != target shape {t.shape}")
    losses = -(t * np.log(np.clip(p, PROB_EPS, None))).sum(axis=-1)
    return float(losses.mean())


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def soft_cross_entropy_from_logits(logits, target) -> float:
    return soft_cross_entropy(softmax(logits), target)


def soft_cross_entropy_logit_grad(logits, target) -> np.ndarray:
    """Gradient of the loss w.r.t. logits: softmax(logits) - target."""
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if z.shape != t.shape:
        raise ValueError(f"logit shape {z.shape} != target shape {t.shape}")
    return softmax(z) - t


# ---------------------------------------------------------------------------
# model

@dataclass
class ClassifierConfig:
    num_classes: int = 3
    image_size: int = 32
    channels: int = 1
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 0.05
    momentum: float = 0.9
    backbone: str = "small-cnn"
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        for name in ("num_classes", "image_size", "channels", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {self.backbone!r}; available: {sorted(BACKBONES)}")


class _SmallCnn(nn.Module):
    """Three conv/pool blocks, global average pooling, linear head."""

    feature_dim = 64

    def __init__(self, cfg: ClassifierConfig):
        super().__init__()
        self.blocks = nn.Sequential(
            nn.Conv2d(cfg.channels, 16, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(16, 32, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
            nn.Conv2d(32, 64, 3, padding=1), nn.ReLU(), nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
        )
        self.head = nn.Linear(self.feature_dim, cfg.num_classes)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.blocks(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))


BACKBONES = {"small-cnn": _SmallCnn}


@dataclass
class ClassifierModel:
    config: ClassifierConfig
    net: nn.Module
    epoch_log: list = field(default_factory=list)

    @property
    def feature_dim(self) -> int:
        return self.net.feature_dim


def _to_tensors(dataset: list[LabeledSample], cfg: ClassifierConfig) -> tuple[torch.Tensor, torch.Tensor]:
    expected = (cfg.image_size, cfg.image_size, cfg.channels)
    images = np.empty((len(dataset), cfg.channels, cfg.image_size, cfg.image_size), dtype=np.float32)
    labels = np.empty((len(dataset), cfg.num_classes), dtype=np.float32)
    for i, sample in enumerate(dataset):
        if sample.image.shape != expected:
            raise ValueError(f"sample {i} has shape {sample.image.shape}, config expects {expected}")
        if sample.label.size != cfg.num_classes:
            raise ValueError(f"sample {i} has {sample.label.size} classes, config expects {cfg.num_classes}")
        images[i] = np.moveaxis(sample.image, -1, 0)
        labels[i] = sample.label
    return torch.from_numpy(images * 2.0 - 1.0), torch.from_numpy(labels)


def _images_tensor(images, cfg: ClassifierConfig) -> torch.Tensor:
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    expected = (cfg.image_size, cfg.image_size, cfg.channels)
    if arr.shape[1:] != expected:
        raise ValueError(f"images have shape {arr.shape[1:]}, config expects {expected}")
    arr = np.moveaxis(arr, -1, 1)
    return torch.from_numpy(arr * 2.0 - 1.0)


def _soft_ce_torch(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    return -(targets * F.log_softmax(logits, dim=1)).sum(dim=1).mean()


def train_classifier(dataset: list[LabeledSample], config: ClassifierConfig,
                     val: list[LabeledSample] | None = None) -> ClassifierModel:
    """Mini-batch SGD with momentum on the soft cross-entropy. The optional
    val set is used for monitoring only; per-epoch losses are logged."""
    if not dataset:
        raise ValueError("training dataset is empty")
    if config.deterministic:
        torch.set_num_threads(1)
    x, y = _to_tensors(dataset, config)
    val_tensors = _to_tensors(val, config) if val else None

    torch.manual_seed(config.seed)
    net = BACKBONES[config.backbone](config)
    opt = torch.optim.SGD(net.parameters(), lr=config.learning_rate, momentum=config.momentum)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0,)))

    log = []
    for epoch in range(config.epochs):
        net.train()
        order = torch.from_numpy(shuffle_rng.permutation(len(dataset)))
        total, seen = 0.0, 0
        for start in range(0, len(dataset), config.batch_size):
            idx = order[start:start + config.batch_size]
            opt.zero_grad()
            loss = _soft_ce_torch(net(x[idx]), y[idx])
            loss.backward()
            opt.step()
            value = float(loss.detach())
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite training loss at epoch {epoch}: {value}; lower the learning rate")
            total += value * len(idx)
            seen += len(idx)
        entry = {"epoch": epoch, "train_loss": total / seen}
        if val_tensors is not None:
            net.eval()
            with torch.no_grad():
                entry["val_loss"] = float(_soft_ce_torch(net(val_tensors[0]), val_tensors[1]))
        log.append(entry)

    net.eval()
    return ClassifierModel(config=config, net=net, epoch_log=log)


def _forward_chunks(model: ClassifierModel, images, op) -> np.ndarray:
    x = _images_tensor(images, model.config)
    model.net.eval()
    outs = []
    with torch.no_grad():
        for start in range(0, len(x), 512):
            outs.append(op(x[start:start + 512]))
    return torch.cat(outs).numpy().astype(np.float64)


def predict(model: ClassifierModel, images) -> np.ndarray:
    """Class probability vectors, one simplex row per image."""
    return _forward_chunks(model, images, lambda b: torch.softmax(model.net(b), dim=1))


def extract_features(model: ClassifierModel, images) -> np.ndarray:
    """Penultimate-layer activations, one fixed-size row per image."""
    return _forward_chunks(model, images, lambda b: model.net.features(b))


def save_feature_table(path, ids, provenances, features) -> Path:
    """Delimited numeric table (id, provenance, f_1..f_d) for external
    embedding tools."""
    features = np.asarray(features)
    if not len(ids) == len(provenances) == len(features):
        raise ValueError("ids, provenances, and features must have equal lengths")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "provenance"] + [f"f_{j + 1}" for j in range(features.shape[1])])
        for sid, prov, row in zip(ids, provenances, features):
            writer.writerow([sid, prov] + [repr(float(v)) for v in row])
    return path


def save_classifier(model: ClassifierModel, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({
        "format_version": MODEL_FORMAT_VERSION,
        "kind": MODEL_KIND,
        "config": asdict(model.config),
        "model_state": model.net.state_dict(),
        "epoch_log": model.epoch_log,
    }, path)
    return path


def load_classifier(path) -> ClassifierModel:
    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointFormatError(f"cannot read classifier checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("kind") != MODEL_KIND:
        raise CheckpointFormatError(f"{path} is not a classifier checkpoint")
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise CheckpointFormatError(
            f"classifier format version {version} in {path}, this build reads "
            f"version {MODEL_FORMAT_VERSION}")
    known = {f.name for f in fields(ClassifierConfig)}
    config = ClassifierConfig(**{k: v for k, v in payload["config"].items() if k in known})
    net = BACKBONES[config.backbone](config)
    net.load_state_dict(payload["model_state"])
    net.eval()
    return ClassifierModel(config=config, net=net, epoch_log=payload.get("epoch_log", []))
