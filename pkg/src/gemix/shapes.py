"""Procedural shape datasets used as a desk-scale stand-in for real scans.

Each class is a parametric grayscale pattern (filled disk, ring, cross,
square, stripes, checker) with jittered position, size, intensity, and
additive noise, so classes are unambiguous to an oracle classifier while
still showing intra-class variation. Pixel values are quantized to the
uint8 grid at generation time, which makes in-memory samples identical to
their PNG round trip.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .data import LabeledSample, one_hot

PATTERNS = ("disk", "ring", "cross", "square", "stripes", "checker")


def _soft_mask(signed_dist: np.ndarray, edge: float) -> np.ndarray:
    """1 inside (signed_dist <= 0), 0 outside, smooth over `edge` pixels."""
    return np.clip(0.5 - signed_dist / max(edge, 1e-6), 0.0, 1.0)


def render_pattern(name: str, size: int, rng: np.random.Generator) -> np.ndarray:
    """One jittered instance of a pattern as an (size, size) float array in [0, 1]."""
    if name not in PATTERNS:
        raise ValueError(f"unknown pattern {name!r}, expected one of {PATTERNS}")
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    cx = size * (0.5 + rng.uniform(-0.1, 0.1))
    cy = size * (0.5 + rng.uniform(-0.1, 0.1))
    radius = size * rng.uniform(0.26, 0.38)
    amplitude = rng.uniform(0.65, 1.0)
    edge = max(size / 32.0, 1.0)
    dist = np.hypot(xs - cx, ys - cy)

    if name == "disk":
        mask = _soft_mask(dist - radius, edge)
    elif name == "ring":
        thickness = size * rng.uniform(0.07, 0.11)
        mask = _soft_mask(np.abs(dist - radius) - thickness, edge)
    elif name == "cross":
        thickness = size * rng.uniform(0.07, 0.11)
        horiz = np.maximum(np.abs(ys - cy) - thickness, np.abs(xs - cx) - radius)
        vert = np.maximum(np.abs(xs - cx) - thickness, np.abs(ys - cy) - radius)
        mask = np.maximum(_soft_mask(horiz, edge), _soft_mask(vert, edge))
    elif name == "square":
        half = radius * 0.85
        cheb = np.maximum(np.abs(xs - cx), np.abs(ys - cy))
        mask = _soft_mask(cheb - half, edge)
    elif name == "stripes":
        period = size * rng.uniform(0.22, 0.30)
        phase = rng.uniform(0.0, period)
        wave = np.sin(2.0 * np.pi * (ys + phase) / period)
        mask = np.clip(wave * 2.5, 0.0, 1.0)
    else:  # checker
        period = size * rng.uniform(0.28, 0.40)
        phase_x = rng.uniform(0.0, period)
        phase_y = rng.uniform(0.0, period)
        wave = (np.sin(2.0 * np.pi * (xs + phase_x) / period)
                * np.sin(2.0 * np.pi * (ys + phase_y) / period))
        mask = np.clip(wave * 2.5, 0.0, 1.0)

    image = amplitude * mask + rng.normal(0.0, 0.04, size=(size, size))
    image = np.clip(image, 0.0, 1.0)
    # quantize to the uint8 grid so PNG persistence is value-exact
    return (np.round(image * 255.0) / 255.0).astype(np.float32)


def make_shape_samples(num_classes: int, per_class: int, image_size: int,
                       rng: np.random.Generator) -> list[LabeledSample]:
    """Balanced list of one-hot labeled pattern samples, grouped by class."""
    if not 1 <= num_classes <= len(PATTERNS):
        raise ValueError(f"num_classes must be in [1, {len(PATTERNS)}], got {num_classes}")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if image_size < 8:
        raise ValueError(f"image_size must be >= 8, got {image_size}")
    samples = []
    for cls in range(num_classes):
        label = one_hot(cls, num_classes)
        for _ in range(per_class):
            image = render_pattern(PATTERNS[cls], image_size, rng)[:, :, None]
            samples.append(LabeledSample(image=image, label=label.copy(), provenance="real"))
    return samples


def class_folder_name(class_index: int) -> str:
    # numeric prefix keeps sorted folder order aligned with class indices
    return f"{class_index:02d}_{PATTERNS[class_index]}"


def write_class_folders(samples: list[LabeledSample], out_dir) -> Path:
    """Write samples as uint8 PNGs in the `root/<class_name>/` layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counters: dict[int, int] = {}
    for sample in samples:
        cls = int(np.argmax(sample.label))
        folder = out / class_folder_name(cls)
        folder.mkdir(exist_ok=True)
        index = counters.get(cls, 0)
        counters[cls] = index + 1
        plane = np.round(sample.image[:, :, 0] * 255.0).astype(np.uint8)
        Image.fromarray(plane, mode="L").save(folder / f"{index:05d}.png")
    return out


def generate_shape_dataset(out_dir, num_classes: int, per_class: int, image_size: int,
                           rng: np.random.Generator) -> Path:
    """Generate and persist a class-folder shape dataset; returns its root."""
    samples = make_shape_samples(num_classes, per_class, image_size, rng)
    return write_class_folders(samples, out_dir)
