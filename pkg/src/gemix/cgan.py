"""Class-conditional GAN: stage-1 training on one-hot labels and a
deterministic conditional generator for stage-2 soft-label synthesis.

A compact transposed-convolution generator and strided-convolution
discriminator sized for 16-128 px images. The label vector enters both
networks through a bias-free linear embedding, so conditioning on a convex
combination of labels embeds exactly the convex combination of the
embeddings; that linearity is what makes soft-label conditioning a
principled interpolation at generation time. The generator squashes with
tanh and its output is mapped affinely to the canonical [0, 1] range.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .data import LabeledSample, check_label, is_one_hot
from .mixers import GeneratorHandle

CHECKPOINT_FORMAT_VERSION = 1
CHECKPOINT_KIND = "gemix-cgan"


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""


class CheckpointFormatError(RuntimeError):
    """A checkpoint file is unreadable or has an unsupported format."""


@dataclass
class GanConfig:
    image_size: int = 32
    channels: int = 1
    num_classes: int = 3
    latent_dim: int = 64
    batch_size: int = 32          # mini-batches of 32, no mirroring augmentation
    steps: int = 4000
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    label_embed_dim: int = 16
    base_channels: int = 32
    seed: int = 0
    deterministic: bool = True

    def __post_init__(self):
        for name in ("image_size", "channels", "num_classes", "latent_dim",
                     "batch_size", "label_embed_dim", "base_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise ValueError(f"learning rates must be > 0, got ({self.lr_g}, {self.lr_d})")
        if _num_blocks(self.image_size) is None:
            raise ValueError(f"image_size must be 4 * 2^k with k >= 1 (16, 32, 64, ...), got {self.image_size}")


@dataclass
class Checkpoint:
    config: GanConfig
    generator_state: dict
    discriminator_state: dict
    step: int
    torch_rng_state: torch.Tensor
    train_log: list = field(default_factory=list)


def _num_blocks(image_size: int) -> int | None:
    size, blocks = image_size, 0
    while size > 4 and size % 2 == 0:
        size //= 2
        blocks += 1
    return blocks if (size == 4 and blocks >= 1) else None


def _group_norm(channels: int) -> nn.GroupNorm:
    groups = 8
    while channels % groups:
        groups //= 2
    return nn.GroupNorm(max(groups, 1), channels)


class _Generator(nn.Module):
    def __init__(self, cfg: GanConfig):
        super().__init__()
        blocks = _num_blocks(cfg.image_size)
        ch = cfg.base_channels * 2 ** (blocks - 1)
        self.start_channels = ch
        self.label_embed = nn.Linear(cfg.num_classes, cfg.label_embed_dim, bias=False)
        self.fc = nn.Linear(cfg.latent_dim + cfg.label_embed_dim, ch * 4 * 4)
        layers: list[nn.Module] = [_group_norm(ch), nn.ReLU()]
        for _ in range(blocks - 1):
            layers += [nn.ConvTranspose2d(ch, ch // 2, 4, 2, 1), _group_norm(ch // 2), nn.ReLU()]
            ch //= 2
        layers += [nn.ConvTranspose2d(ch, cfg.channels, 4, 2, 1), nn.Tanh()]
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        h = torch.cat([z, self.label_embed(labels)], dim=1)
        h = self.fc(h).view(-1, self.start_channels, 4, 4)
        return self.net(h)


class _Discriminator(nn.Module):
    def __init__(self, cfg: GanConfig):
        super().__init__()
        blocks = _num_blocks(cfg.image_size)
        layers: list[nn.Module] = [nn.Conv2d(cfg.channels, cfg.base_channels, 4, 2, 1),
                                   nn.LeakyReLU(0.2)]
        ch = cfg.base_channels
        for _ in range(blocks - 1):
            layers += [nn.Conv2d(ch, ch * 2, 4, 2, 1), _group_norm(ch * 2), nn.LeakyReLU(0.2)]
            ch *= 2
        layers.append(nn.Flatten())
        self.trunk = nn.Sequential(*layers)
        self.label_embed = nn.Linear(cfg.num_classes, cfg.label_embed_dim, bias=False)
        self.fc = nn.Linear(ch * 4 * 4 + cfg.label_embed_dim, 1)

    def forward(self, images: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
        h = torch.cat([self.trunk(images), self.label_embed(labels)], dim=1)
        return self.fc(h)


def _dataset_tensors(dataset: list[LabeledSample], cfg: GanConfig) -> tuple[torch.Tensor, torch.Tensor]:
    if not dataset:
        raise ValueError("training dataset is empty")
    expected = (cfg.image_size, cfg.image_size, cfg.channels)
    images = np.empty((len(dataset), cfg.channels, cfg.image_size, cfg.image_size), dtype=np.float32)
    labels = np.empty((len(dataset), cfg.num_classes), dtype=np.float32)
    for i, sample in enumerate(dataset):
        if sample.image.shape != expected:
            raise ValueError(f"sample {i} has shape {sample.image.shape}, config expects {expected}")
        if sample.label.size != cfg.num_classes:
            raise ValueError(f"sample {i} has {sample.label.size} classes, config expects {cfg.num_classes}")
        if not is_one_hot(sample.label):
            raise ValueError(f"sample {i} label {sample.label} is not one-hot; "
                             "stage-1 training uses hard labels only")
        images[i] = np.moveaxis(sample.image, -1, 0)
        labels[i] = sample.label
    # canonical [0, 1] -> symmetric [-1, 1] used inside the GAN
    return torch.from_numpy(images * 2.0 - 1.0), torch.from_numpy(labels)


def train_cgan(dataset: list[LabeledSample], config: GanConfig) -> Checkpoint:
    """Alternating 1:1 discriminator/generator updates of the conditional
    objective with the non-saturating generator loss. Returns a checkpoint
    carrying both networks, the config, and the per-step loss log."""
    if config.deterministic:
        torch.set_num_threads(1)
    real_x, real_y = _dataset_tensors(dataset, config)
    n = len(dataset)

    torch.manual_seed(config.seed)
    generator = _Generator(config)
    discriminator = _Discriminator(config)
    opt_g = torch.optim.Adam(generator.parameters(), lr=config.lr_g, betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=config.lr_d, betas=(0.5, 0.999))
    bce = nn.BCEWithLogitsLoss()

    batch_rng, latent_rng, class_rng = (
        np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(k,)))
        for k in range(3))
    eye = torch.eye(config.num_classes)
    ones = torch.ones(config.batch_size, 1)
    zeros = torch.zeros(config.batch_size, 1)
    log = []

    for step in range(config.steps):
        idx = torch.from_numpy(batch_rng.integers(0, n, size=config.batch_size))
        z = torch.from_numpy(
            latent_rng.standard_normal((config.batch_size, config.latent_dim)).astype(np.float32))
        fake_y = eye[class_rng.integers(0, config.num_classes, size=config.batch_size)]
        fake = generator(z, fake_y)

        opt_d.zero_grad()
        d_loss = bce(discriminator(real_x[idx], real_y[idx]), ones) \
            + bce(discriminator(fake.detach(), fake_y), zeros)
        d_loss.backward()
        opt_d.step()

        opt_g.zero_grad()
        g_loss = bce(discriminator(fake, fake_y), ones)
        g_loss.backward()
        opt_g.step()

        d_val, g_val = float(d_loss.detach()), float(g_loss.detach())
        if not (np.isfinite(d_val) and np.isfinite(g_val)):
            raise TrainingDivergedError(
                f"non-finite loss at step {step}: d_loss={d_val}, g_loss={g_val}; "
                "lower the learning rates or reduce steps")
        log.append({"step": step, "d_loss": d_val, "g_loss": g_val})

    return Checkpoint(
        config=config,
        generator_state={k: v.detach().clone() for k, v in generator.state_dict().items()},
        discriminator_state={k: v.detach().clone() for k, v in discriminator.state_dict().items()},
        step=config.steps,
        torch_rng_state=torch.get_rng_state(),
        train_log=log,
    )


def build_generator(ckpt: Checkpoint) -> _Generator:
    """Reconstruct the generator network from a checkpoint, in eval mode."""
    if ckpt.config.deterministic:
        torch.set_num_threads(1)
    generator = _Generator(ckpt.config)
    generator.load_state_dict(ckpt.generator_state)
    generator.eval()
    return generator


def _run_generator(generator: _Generator, cfg: GanConfig, z: np.ndarray, ell: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (cfg.latent_dim,):
        raise ValueError(f"latent vector has shape {z.shape}, config expects ({cfg.latent_dim},)")
    ell = check_label(np.asarray(ell, dtype=np.float64))
    if ell.size != cfg.num_classes:
        raise ValueError(f"soft label has {ell.size} weights, config expects {cfg.num_classes}")
    with torch.no_grad():
        zt = torch.from_numpy(z.astype(np.float32))[None, :]
        lt = torch.from_numpy(ell.astype(np.float32))[None, :]
        out = generator(zt, lt)[0]
    image = ((out + 1.0) / 2.0).clamp_(0.0, 1.0).numpy()
    return np.moveaxis(image, 0, -1)


def generate(ckpt: Checkpoint, z: np.ndarray, ell: np.ndarray) -> np.ndarray:
    """Deterministic conditional generation: a pure function of (ckpt, z, ell).

    Accepts any simplex label, including soft ones the GAN never saw in
    training; that interpolation is the whole point of stage 2. For repeated
    generation prefer `as_generator_handle`, which builds the network once.
    """
    return _run_generator(build_generator(ckpt), ckpt.config, z, ell)


def as_generator_handle(ckpt: Checkpoint) -> GeneratorHandle:
    """Wrap a checkpoint as a reusable (z, ell) -> image callable with metadata."""
    generator = build_generator(ckpt)
    cfg = ckpt.config

    def fn(z: np.ndarray, ell: np.ndarray) -> np.ndarray:
        return _run_generator(generator, cfg, z, ell)

    return GeneratorHandle(fn=fn, num_classes=cfg.num_classes, image_size=cfg.image_size,
                           latent_dim=cfg.latent_dim, channels=cfg.channels)


def save_checkpoint(ckpt: Checkpoint, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": CHECKPOINT_KIND,
        "config": asdict(ckpt.config),
        "generator_state": ckpt.generator_state,
        "discriminator_state": ckpt.discriminator_state,
        "step": ckpt.step,
        "torch_rng_state": ckpt.torch_rng_state,
        "train_log": ckpt.train_log,
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointFormatError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("kind") != CHECKPOINT_KIND:
        raise CheckpointFormatError(f"{path} is not a conditional-GAN checkpoint")
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointFormatError(
            f"checkpoint format version {version} in {path}, this build reads "
            f"version {CHECKPOINT_FORMAT_VERSION}")
    known = {f.name for f in fields(GanConfig)}
    config = GanConfig(**{k: v for k, v in payload["config"].items() if k in known})
    return Checkpoint(
        config=config,
        generator_state=payload["generator_state"],
        discriminator_state=payload["discriminator_state"],
        step=payload["step"],
        torch_rng_state=payload["torch_rng_state"],
        train_log=payload.get("train_log", []),
    )
