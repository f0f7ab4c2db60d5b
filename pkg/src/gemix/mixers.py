"""The three sample mixers.

* mixup_pair: classic two-image convex blend, x = lam*x_i + (1-lam)*x_j with
  the same blend applied to the labels.
* mmixup: multi-image blend of one image per class weighted by a Dirichlet
  soft label, x = sum_j ell_j * x_j, y = ell.
* gemix: no pixel blending at all; a trained conditional generator is driven
  by a Dirichlet soft label, x = G(z, ell), y = ell.

Pixel mixers operate on canonical [0, 1] float images, so outputs stay in
range by convexity and are never clipped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import LabeledSample, check_label
from .sampling import (
    DEFAULT_A_EQ,
    DEFAULT_A_NEQ,
    build_concentration,
    sample_dominant_class,
    sample_latent,
    sample_mix_coefficient,
    sample_soft_label,
)


class GeneratorError(RuntimeError):
    """A conditional generator failed while synthesizing a sample."""


@dataclass
class GeneratorHandle:
    """Opaque conditional generator: fn(z, ell) -> (H, W, C) image in [0, 1]."""
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    num_classes: int
    image_size: int
    latent_dim: int
    channels: int = 1


def _check_pair_shapes(x_i: np.ndarray, x_j: np.ndarray) -> None:
    if x_i.shape != x_j.shape:
        raise ValueError(f"image shapes differ: {x_i.shape} vs {x_j.shape}")


def mixup_pair(x_i: np.ndarray, y_i: np.ndarray, x_j: np.ndarray, y_j: np.ndarray,
               lam: float) -> LabeledSample:
    """Convex combination of two images and their labels with weight lam."""
    x_i = np.asarray(x_i, dtype=np.float32)
    x_j = np.asarray(x_j, dtype=np.float32)
    y_i = np.asarray(y_i, dtype=np.float64)
    y_j = np.asarray(y_j, dtype=np.float64)
    _check_pair_shapes(x_i, x_j)
    if y_i.shape != y_j.shape:
        raise ValueError(f"label lengths differ: {y_i.shape} vs {y_j.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mix coefficient must be in [0, 1], got {lam}")
    image = lam * x_i + (1.0 - lam) * x_j
    label = lam * y_i + (1.0 - lam) * y_j
    return LabeledSample(image=image, label=label, provenance="mixup")


def mmixup(images: list[np.ndarray], ell: np.ndarray) -> LabeledSample:
    """Blend one image per class pixel-wise with the soft-label weights."""
    ell = check_label(np.asarray(ell, dtype=np.float64))
    if len(images) != ell.size:
        raise ValueError(f"got {len(images)} images for {ell.size} label weights")
    arrays = [np.asarray(x, dtype=np.float32) for x in images]
    for x in arrays[1:]:
        _check_pair_shapes(arrays[0], x)
    mixed = np.zeros_like(arrays[0])
    for weight, x in zip(ell, arrays):
        mixed += np.float32(weight) * x
    return LabeledSample(image=mixed, label=ell.copy(), provenance="mmixup")


def _generate(gen: GeneratorHandle, z: np.ndarray, ell: np.ndarray, dominant: int) -> np.ndarray:
    try:
        image = gen.fn(z, ell)
    except Exception as exc:
        raise GeneratorError(
            f"generator failed for dominant class {dominant} (ell={np.round(ell, 4)}): {exc}") from exc
    image = np.asarray(image, dtype=np.float32)
    expected = (gen.image_size, gen.image_size, gen.channels)
    if image.shape != expected:
        raise GeneratorError(f"generator returned shape {image.shape}, metadata says {expected}")
    return image


def gemix_sample(gen: GeneratorHandle, num_classes: int | None = None,
                 a_eq: float = DEFAULT_A_EQ, a_neq: float = DEFAULT_A_NEQ,
                 rng: np.random.Generator | None = None) -> LabeledSample:
    """One generator-space mixed sample.

    Draws z ~ N(0, I), a uniform dominant class c, a soft label
    ell ~ Dirichlet(theta(c)), and returns (G(z, ell), ell).
    """
    if rng is None:
        raise ValueError("an explicit rng is required")
    if num_classes is not None and num_classes != gen.num_classes:
        raise ValueError(f"num_classes {num_classes} != generator metadata {gen.num_classes}")
    k = gen.num_classes
    z = sample_latent(gen.latent_dim, rng)
    dominant = sample_dominant_class(k, rng)
    theta = build_concentration(dominant, k, a_eq, a_neq)
    ell = sample_soft_label(theta, rng)
    image = _generate(gen, z, ell, dominant)
    return LabeledSample(image=image, label=ell, provenance="gemix")


def gemix_batch(gen: GeneratorHandle, n: int,
                a_eq: float = DEFAULT_A_EQ, a_neq: float = DEFAULT_A_NEQ,
                rng: np.random.Generator | None = None) -> list[LabeledSample]:
    """N independent gemix draws.

    Latents, class picks, and soft labels come from separate substreams
    spawned off `rng`, so e.g. changing the latent dimension leaves the
    (class, label) sequence untouched.
    """
    if rng is None:
        raise ValueError("an explicit rng is required")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    z_rng, c_rng, l_rng = rng.spawn(3)
    k = gen.num_classes
    out = []
    for _ in range(n):
        z = sample_latent(gen.latent_dim, z_rng)
        dominant = sample_dominant_class(k, c_rng)
        theta = build_concentration(dominant, k, a_eq, a_neq)
        ell = sample_soft_label(theta, l_rng)
        image = _generate(gen, z, ell, dominant)
        out.append(LabeledSample(image=image, label=ell, provenance="gemix"))
    return out


def mmixup_batch(samples_by_class: list[list[LabeledSample]], n: int,
                 a_eq: float = DEFAULT_A_EQ, a_neq: float = DEFAULT_A_NEQ,
                 rng: np.random.Generator | None = None) -> list[LabeledSample]:
    """N multi-image mixup draws: per draw, one uniformly picked image per
    class (with replacement across draws) blended by a Dirichlet soft label."""
    if rng is None:
        raise ValueError("an explicit rng is required")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    k = len(samples_by_class)
    for cls, group in enumerate(samples_by_class):
        if not group:
            raise ValueError(f"class {cls} has no samples to draw from")
    c_rng, l_rng, pick_rng = rng.spawn(3)
    out = []
    for _ in range(n):
        dominant = sample_dominant_class(k, c_rng)
        theta = build_concentration(dominant, k, a_eq, a_neq)
        ell = sample_soft_label(theta, l_rng)
        picks = [samples_by_class[cls][int(pick_rng.integers(0, len(samples_by_class[cls])))]
                 for cls in range(k)]
        out.append(mmixup([s.image for s in picks], ell))
    return out


def mixup_batch(samples: list[LabeledSample], n: int, alpha: float,
                rng: np.random.Generator | None = None) -> list[LabeledSample]:
    """N classic mixup draws over a pool: random pairs, lam ~ Beta(alpha, alpha)."""
    if rng is None:
        raise ValueError("an explicit rng is required")
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not samples:
        raise ValueError("mixup needs a non-empty sample pool")
    pair_rng, lam_rng = rng.spawn(2)
    out = []
    for _ in range(n):
        i, j = pair_rng.integers(0, len(samples), size=2)
        lam = sample_mix_coefficient(alpha, lam_rng)
        a, b = samples[int(i)], samples[int(j)]
        out.append(mixup_pair(a.image, a.label, b.image, b.label, lam))
    return out
