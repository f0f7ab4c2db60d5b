"""Loading, balancing, splitting, and persisting labeled image datasets.

Images are numpy float32 arrays of shape (H, W, C) with values in [0, 1];
labels are numpy float64 probability vectors over the K classes. Real
samples carry one-hot labels, augmented samples carry the soft label that
produced them plus a provenance tag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

PROVENANCES = ("real", "mixup", "mmixup", "gemix")

LABEL_ATOL = 1e-6

FORMAT_VERSION = 1


class DatasetLayoutError(RuntimeError):
    """The on-disk dataset does not have the expected structure."""


class ImageDecodeError(RuntimeError):
    """An image file exists but cannot be decoded."""


@dataclass
class LabeledSample:
    image: np.ndarray       # (H, W, C) float32 in [0, 1]
    label: np.ndarray       # (K,) float64 on the simplex
    provenance: str = "real"

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float32)
        self.label = np.asarray(self.label, dtype=np.float64)
        check_image(self.image)
        check_label(self.label)
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}, expected one of {PROVENANCES}")


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)


def check_image(image: np.ndarray) -> np.ndarray:
    """Validate the canonical image form: (H, W, C) float, values in [0, 1]."""
    if image.ndim != 3:
        raise ValueError(f"image must have shape (H, W, C), got {image.shape}")
    if any(d < 1 for d in image.shape):
        raise ValueError(f"image dimensions must be >= 1, got {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValueError("image contains non-finite values")
    if image.min() < -LABEL_ATOL or image.max() > 1 + LABEL_ATOL:
        raise ValueError(f"image values outside [0, 1]: min={image.min()}, max={image.max()}")
    return image


def check_label(label: np.ndarray, atol: float = LABEL_ATOL) -> np.ndarray:
    """Validate a soft label: K >= 1 weights in [0, 1] summing to 1."""
    if label.ndim != 1 or label.size < 1:
        raise ValueError(f"label must be a 1-D vector with K >= 1, got shape {label.shape}")
    if label.min() < -atol or label.max() > 1 + atol:
        raise ValueError(f"label weights outside [0, 1]: {label}")
    total = float(label.sum())
    if abs(total - 1.0) > atol:
        raise ValueError(f"label weights sum to {total}, expected 1 within {atol}")
    return label


def one_hot(class_index: int, num_classes: int) -> np.ndarray:
    if not 0 <= class_index < num_classes:
        raise ValueError(f"class index {class_index} outside [0, {num_classes})")
    label = np.zeros(num_classes, dtype=np.float64)
    label[class_index] = 1.0
    return label


def is_one_hot(label: np.ndarray, atol: float = LABEL_ATOL) -> bool:
    return bool(np.isclose(label.max(), 1.0, atol=atol) and abs(label.sum() - 1.0) <= atol)


def label_class(sample: LabeledSample) -> int:
    """Class index of a sample: the argmax of its label (lowest index on ties)."""
    return int(np.argmax(sample.label))


def resize_image(image: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize of an (H, W, C) float image to (size, size, C)."""
    if image.shape[0] == size and image.shape[1] == size:
        return image.astype(np.float32, copy=False)
    channels = []
    for c in range(image.shape[2]):
        plane = Image.fromarray(image[:, :, c].astype(np.float32), mode="F")
        plane = plane.resize((size, size), Image.BILINEAR)
        channels.append(np.asarray(plane, dtype=np.float32))
    out = np.stack(channels, axis=-1)
    # bilinear interpolation of [0, 1] data can drift by float rounding only
    return np.clip(out, 0.0, 1.0)


def _decode_image_file(path: Path, image_size: int, channels: int) -> np.ndarray:
    try:
        with Image.open(path) as im:
            im = im.convert("L" if channels == 1 else "RGB")
            arr = np.asarray(im, dtype=np.float32) / 255.0
    except Exception as exc:
        raise ImageDecodeError(f"cannot decode image file {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return resize_image(arr, image_size)


def load_class_folders(root, num_classes: int, image_size: int, channels: int = 1) -> list[LabeledSample]:
    """Load a `root/<class_name>/*` image tree into one-hot labeled samples.

    Class indices follow the sorted order of the folder names. Every image is
    resized (bilinear) to image_size x image_size with values in [0, 1].
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetLayoutError(f"dataset root {root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if len(class_dirs) != num_classes:
        names = [p.name for p in class_dirs]
        raise DatasetLayoutError(
            f"expected exactly {num_classes} class folders under {root}, found {len(class_dirs)}: {names}")
    samples = []
    for index, class_dir in enumerate(class_dirs):
        files = sorted(p for p in class_dir.iterdir() if p.is_file())
        if not files:
            raise DatasetLayoutError(f"class folder {class_dir.name!r} contains no images")
        label = one_hot(index, num_classes)
        for path in files:
            image = _decode_image_file(path, image_size, channels)
            samples.append(LabeledSample(image=image, label=label.copy(), provenance="real"))
    return samples


def balanced_subsample(samples: list[LabeledSample], per_class: int,
                       rng: np.random.Generator) -> list[LabeledSample]:
    """Uniform subsample without replacement of exactly per_class samples per class."""
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    groups: dict[int, list[LabeledSample]] = {}
    for sample in samples:
        groups.setdefault(label_class(sample), []).append(sample)
    for cls in sorted(groups):
        have = len(groups[cls])
        if have < per_class:
            raise ValueError(
                f"class {cls} has only {have} samples, need {per_class} (short by {per_class - have})")
    out: list[LabeledSample] = []
    for cls in sorted(groups):
        group = groups[cls]
        chosen = rng.choice(len(group), size=per_class, replace=False)
        out.extend(group[i] for i in chosen)
    return out


def split_train_val(samples: list[LabeledSample], train_fraction: float,
                    rng: np.random.Generator) -> DatasetSplit:
    """Stratified train/val partition honoring train_fraction to within one sample per class."""
    if not samples:
        raise ValueError("cannot split an empty sample list")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    groups: dict[int, list[LabeledSample]] = {}
    for sample in samples:
        groups.setdefault(label_class(sample), []).append(sample)
    split = DatasetSplit()
    for cls in sorted(groups):
        group = groups[cls]
        order = rng.permutation(len(group))
        n_train = int(np.floor(train_fraction * len(group) + 0.5))
        split.train.extend(group[i] for i in order[:n_train])
        split.val.extend(group[i] for i in order[n_train:])
    return split


def group_by_class(samples: list[LabeledSample], num_classes: int) -> list[list[LabeledSample]]:
    """Bucket samples into per-class lists indexed by their label argmax."""
    buckets: list[list[LabeledSample]] = [[] for _ in range(num_classes)]
    for sample in samples:
        cls = label_class(sample)
        if cls >= num_classes:
            raise ValueError(f"sample class {cls} outside [0, {num_classes})")
        buckets[cls].append(sample)
    return buckets


def save_dataset(samples: list[LabeledSample], out_dir) -> Path:
    """Persist samples losslessly: float32 `.npy` images plus a labels.jsonl sidecar.

    Each sidecar record carries the relative image `path`, the K label
    `weights`, and the `provenance` tag; manifest.json records the dataset
    geometry. Returns the manifest path.
    """
    if not samples:
        raise ValueError("cannot save an empty dataset")
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    height, width, channels = samples[0].image.shape
    num_classes = samples[0].label.size
    records = []
    for i, sample in enumerate(samples):
        if sample.image.shape != (height, width, channels):
            raise ValueError(f"sample {i} has shape {sample.image.shape}, expected {(height, width, channels)}")
        if sample.label.size != num_classes:
            raise ValueError(f"sample {i} has {sample.label.size} label weights, expected {num_classes}")
        rel = f"images/{i:06d}.npy"
        np.save(out / rel, sample.image.astype(np.float32, copy=False))
        records.append({"path": rel,
                        "weights": [float(w) for w in sample.label],
                        "provenance": sample.provenance})
    with open(out / "labels.jsonl", "w") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    manifest = {
        "format_version": FORMAT_VERSION,
        "count": len(samples),
        "num_classes": int(num_classes),
        "height": int(height),
        "width": int(width),
        "channels": int(channels),
    }
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest_path


def load_dataset(in_dir) -> list[LabeledSample]:
    """Reload a dataset written by save_dataset; images round-trip bit-exactly."""
    root = Path(in_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetLayoutError(f"no manifest.json under {root}")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise DatasetLayoutError(
            f"dataset format version {version} in {manifest_path}, this build reads version {FORMAT_VERSION}")
    shape = (manifest["height"], manifest["width"], manifest["channels"])
    samples = []
    with open(root / "labels.jsonl") as fh:
        for line_no, line in enumerate(fh):
            record = json.loads(line)
            image = np.load(root / record["path"])
            if image.shape != shape:
                raise DatasetLayoutError(
                    f"image {record['path']} has shape {image.shape}, manifest says {shape}")
            label = np.asarray(record["weights"], dtype=np.float64)
            samples.append(LabeledSample(image=image, label=label, provenance=record["provenance"]))
    if len(samples) != manifest["count"]:
        raise DatasetLayoutError(
            f"manifest count {manifest['count']} != {len(samples)} sidecar records in {root}")
    return samples
