"""Dataset ingestion and deterministic splitting.

Two ingestion paths: directories of grayscale images (one subdirectory
per class, PGM binary P5 or 8-bit grayscale PNG, pixels scaled to
[0, 1]) and a self-contained binary feature-vector file format for
pre-extracted 1-D features.

Feature file layout (little-endian):
    magic  "DCFV1\\0" (6 bytes)
    u32    n   (record count, >= 1)
    u32    d   (feature dimension)
    u32    C   (class count)
    C x  { u16 byte length + UTF-8 class name }
    n x  { u32 class index + d x f64 features }
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DataError

FEATURE_MAGIC = b"DCFV1\0"

MODE_IMAGE = "image"
MODE_FEATURE = "feature"


@dataclass(frozen=True)
class Dataset:
    """Samples (equal-shape float64 matrices) with string labels."""

    samples: tuple
    labels: tuple
    mode: str

    def __post_init__(self):
        if self.mode not in (MODE_IMAGE, MODE_FEATURE):
            raise DataError(f"unknown dataset mode {self.mode!r}")
        if len(self.samples) != len(self.labels):
            raise DataError(
                f"{len(self.samples)} samples but {len(self.labels)} labels"
            )
        if len(self.samples) == 0:
            raise DataError("dataset must contain at least one sample")
        shape = self.samples[0].shape
        for s in self.samples:
            if s.shape != shape:
                raise DataError(
                    f"samples have inconsistent shapes: {shape} vs {s.shape}"
                )
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))

    @property
    def n(self):
        return len(self.samples)

    @property
    def sample_shape(self):
        return self.samples[0].shape

    @property
    def class_names(self):
        """Class vocabulary in deterministic (lexicographic) order."""
        return tuple(sorted(set(self.labels)))


def load_image_dir(path, expected_rows, expected_cols):
    """Load a class-per-subdirectory tree of grayscale images.

    Labels are the subdirectory names; files are read in lexicographic
    order so two loads of the same tree are identical.  Pixels are
    scaled to [0, 1] by dividing by 255.
    """
    root = Path(path)
    if not root.is_dir():
        raise DataError(f"dataset directory not found: {root}")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise DataError(f"no class subdirectories in {root}")
    samples, labels = [], []
    for class_dir in class_dirs:
        files = sorted(f for f in class_dir.iterdir()
                       if f.is_file() and f.suffix.lower() in (".pgm", ".png"))
        for f in files:
            try:
                with Image.open(f) as img:
                    if img.mode != "L":
                        raise DataError(
                            f"{f}: expected 8-bit grayscale, got mode {img.mode!r}"
                        )
                    arr = np.asarray(img, dtype=np.float64)
            except (UnidentifiedImageError, OSError) as exc:
                raise DataError(f"{f}: unreadable image ({exc})") from exc
            if arr.shape != (expected_rows, expected_cols):
                raise DataError(
                    f"{f}: image is {arr.shape[0]}x{arr.shape[1]}, expected "
                    f"{expected_rows}x{expected_cols}"
                )
            samples.append(arr / 255.0)
            labels.append(class_dir.name)
    if not samples:
        raise DataError(f"no PGM/PNG images found under {root}")
    return Dataset(tuple(samples), tuple(labels), MODE_IMAGE)


def save_feature_file(dataset, path):
    """Write a feature-1D dataset to the binary feature format."""
    if dataset.mode != MODE_FEATURE:
        raise DataError("save_feature_file requires a feature-mode dataset")
    names = dataset.class_names
    index = {name: i for i, name in enumerate(names)}
    d = dataset.samples[0].shape[0]
    chunks = [FEATURE_MAGIC,
              struct.pack("<III", dataset.n, d, len(names))]
    for name in names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise DataError(f"class name too long to encode: {name!r}")
        chunks.append(struct.pack("<H", len(raw)) + raw)
    for sample, label in zip(dataset.samples, dataset.labels):
        chunks.append(struct.pack("<I", index[label]))
        chunks.append(np.ascontiguousarray(sample[:, 0], dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_feature_file(path):
    """Read a feature-1D dataset; each record becomes a (d, 1) sample."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read feature file {path}: {exc}") from exc

    offset = 0

    def take(count, what):
        nonlocal offset
        if offset + count > len(blob):
            raise DataError(f"{path}: truncated feature file while reading {what}")
        chunk = blob[offset:offset + count]
        offset += count
        return chunk

    if take(len(FEATURE_MAGIC), "magic") != FEATURE_MAGIC:
        raise DataError(f"{path}: not a feature file (bad magic)")
    n, d, n_classes = struct.unpack("<III", take(12, "header"))
    if n < 1:
        raise DataError(f"{path}: feature file declares {n} records; need >= 1")
    if d < 1:
        raise DataError(f"{path}: feature dimension must be >= 1, got {d}")
    if n_classes < 1:
        raise DataError(f"{path}: class count must be >= 1, got {n_classes}")
    names = []
    for _ in range(n_classes):
        (length,) = struct.unpack("<H", take(2, "class-name length"))
        names.append(take(length, "class name").decode("utf-8"))
    samples, labels = [], []
    for r in range(n):
        (cls,) = struct.unpack("<I", take(4, f"record {r} label"))
        if cls >= n_classes:
            raise DataError(
                f"{path}: record {r} has class index {cls}, but only "
                f"{n_classes} classes are declared"
            )
        vec = np.frombuffer(take(8 * d, f"record {r} features"), dtype="<f8")
        samples.append(vec.astype(np.float64).reshape(d, 1))
        labels.append(names[cls])
    if offset != len(blob):
        raise DataError(f"{path}: {len(blob) - offset} trailing bytes after payload")
    return Dataset(tuple(samples), tuple(labels), MODE_FEATURE)


def split(dataset, per_class_train, seed=0):
    """Stratified train/test split, deterministic for a fixed seed.

    ``per_class_train`` is either an integer count or a fraction in
    (0, 1) of each class's samples; every class must keep at least one
    sample on each side.  Both halves preserve the original dataset
    order.
    """
    rng = np.random.default_rng(seed)
    by_class = {}
    for idx, label in enumerate(dataset.labels):
        by_class.setdefault(label, []).append(idx)

    train_idx = set()
    for label in sorted(by_class):
        members = by_class[label]
        size = len(members)
        if isinstance(per_class_train, float) and not per_class_train.is_integer():
            if not 0.0 < per_class_train < 1.0:
                raise ValueError(
                    f"fractional per_class_train must be in (0, 1), got {per_class_train}"
                )
            k = int(per_class_train * size)
        else:
            k = int(per_class_train)
        if k < 1:
            raise DataError(
                f"class {label!r}: split would leave no training samples "
                f"(per_class_train={per_class_train}, class size {size})"
            )
        if k >= size:
            raise DataError(
                f"class {label!r} has {size} samples; cannot reserve {k} for "
                "training and still test on it"
            )
        chosen = rng.permutation(size)[:k]
        train_idx.update(members[i] for i in chosen)

    def subset(keep):
        idxs = [i for i in range(dataset.n) if (i in train_idx) == keep]
        return Dataset(tuple(dataset.samples[i] for i in idxs),
                       tuple(dataset.labels[i] for i in idxs),
                       dataset.mode)

    return subset(True), subset(False)
