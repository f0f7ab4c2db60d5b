"""Stochastic core: concentration vectors, Dirichlet soft labels, Beta mix
coefficients, Gaussian latents, and seeded substream derivation.

All draws go through an explicitly passed numpy Generator, so callers own
determinism. Dirichlet sampling is implemented by normalizing independent
gamma draws and Beta(a, a) by the two-gamma ratio, which keeps both
dimension-agnostic and directly checkable against analytic moments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Soft-label synthesis defaults: dominant-class concentration 2, others 1,
# 30000 generated samples per run.
DEFAULT_A_EQ = 2.0
DEFAULT_A_NEQ = 1.0
DEFAULT_NUM_SYNTHETIC = 30000

# The classic two-image mixup baseline defaults to Beta(1, 1), i.e. a
# uniform mix coefficient.
DEFAULT_MIXUP_ALPHA = 1.0

# Fixed offsets for per-purpose RNG substreams. One run-level seed plus an
# offset fully determines a stream, so drawing more of one kind never
# perturbs the others.
STREAM_OFFSETS = {
    "class_picks": 0,
    "labels": 1,
    "latents": 2,
    "image_picks": 3,
    "pairing": 4,
    "subsample": 5,
    "split": 6,
    "shuffle": 7,
    "data:gan": 8,
    "data:clf": 9,
    "data:test": 10,
    "augment:mixup": 11,
    "augment:mmixup": 12,
    "augment:gemix": 13,
}


@dataclass(frozen=True)
class ConcentrationVector:
    """Dirichlet parameter with concentration a_eq at the dominant class and
    a_neq elsewhere, a_eq > a_neq > 0."""
    theta: np.ndarray
    dominant: int


def substream(seed: int, purpose) -> np.random.Generator:
    """Derive the deterministic substream for a named purpose (or raw offset)."""
    offset = STREAM_OFFSETS[purpose] if isinstance(purpose, str) else int(purpose)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(offset,)))


def sample_dominant_class(num_classes: int, rng: np.random.Generator,
                          size: int | None = None):
    """Uniform draw of the dominant class index from {0, ..., K-1}.

    With `size` returns a vector of independent draws instead of one int.
    """
    if num_classes < 1:
        raise ValueError(f"num_classes must be >= 1, got {num_classes}")
    if size is None:
        return int(rng.integers(0, num_classes))
    return rng.integers(0, num_classes, size=size)


def build_concentration(dominant: int, num_classes: int,
                        a_eq: float = DEFAULT_A_EQ,
                        a_neq: float = DEFAULT_A_NEQ) -> ConcentrationVector:
    """Concentration vector with a_eq at the dominant class and a_neq elsewhere."""
    if num_classes < 1:
        raise ValueError(f"num_classes must be >= 1, got {num_classes}")
    if not 0 <= dominant < num_classes:
        raise ValueError(f"dominant class {dominant} outside [0, {num_classes})")
    if not (a_eq > a_neq > 0):
        raise ValueError(
            f"concentrations must satisfy a_eq > a_neq > 0, got a_eq={a_eq}, a_neq={a_neq}")
    theta = np.full(num_classes, float(a_neq), dtype=np.float64)
    theta[dominant] = float(a_eq)
    return ConcentrationVector(theta=theta, dominant=int(dominant))


def sample_soft_label(theta, rng: np.random.Generator,
                      size: int | None = None) -> np.ndarray:
    """Draw a soft label from Dirichlet(theta) via normalized gamma draws.

    Accepts a ConcentrationVector or any positive vector (e.g. the
    exchangeable all-ones case used for uniformity checks). The result is
    renormalized onto the simplex. With `size` returns (size, K) rows of
    independent draws.
    """
    values = theta.theta if isinstance(theta, ConcentrationVector) else np.asarray(theta, dtype=np.float64)
    if values.ndim != 1 or values.size < 1:
        raise ValueError(f"theta must be a 1-D vector with K >= 1, got shape {values.shape}")
    if np.any(values <= 0):
        raise ValueError(f"theta entries must be positive, got {values}")
    if size is None:
        draws = rng.standard_gamma(values)
        total = draws.sum()
        while total <= 0.0:  # all-zero underflow is possible for tiny concentrations
            draws = rng.standard_gamma(values)
            total = draws.sum()
        return draws / total
    draws = rng.standard_gamma(values, size=(size, values.size))
    totals = draws.sum(axis=1)
    for row in np.flatnonzero(totals <= 0.0):
        while totals[row] <= 0.0:
            draws[row] = rng.standard_gamma(values)
            totals[row] = draws[row].sum()
    return draws / totals[:, None]


def sample_mix_coefficient(alpha: float, rng: np.random.Generator,
                           size: int | None = None):
    """Draw lambda ~ Beta(alpha, alpha) as a ratio of two gamma variates.

    With `size` returns a vector of independent draws instead of one float.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if size is None:
        g1 = rng.standard_gamma(alpha)
        g2 = rng.standard_gamma(alpha)
        while g1 + g2 == 0.0:
            g1 = rng.standard_gamma(alpha)
            g2 = rng.standard_gamma(alpha)
        return float(g1 / (g1 + g2))
    g1 = rng.standard_gamma(alpha, size=size)
    g2 = rng.standard_gamma(alpha, size=size)
    for i in np.flatnonzero(g1 + g2 == 0.0):
        while g1[i] + g2[i] == 0.0:
            g1[i] = rng.standard_gamma(alpha)
            g2[i] = rng.standard_gamma(alpha)
    return g1 / (g1 + g2)


def sample_latent(dim: int, rng: np.random.Generator,
                  size: int | None = None) -> np.ndarray:
    """Draw z ~ N(0, I) of the given dimension; (size, dim) rows with `size`."""
    if dim < 1:
        raise ValueError(f"latent dimension must be >= 1, got {dim}")
    if size is None:
        return rng.standard_normal(dim)
    return rng.standard_normal((size, dim))
