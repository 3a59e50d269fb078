"""Synthetic two-class stripe datasets.

Small labelled image sets ("horizontal" vs "vertical" stripe patterns
with additive Gaussian noise) for demos, smoke tests, and end-to-end
checks that need no external data.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from .dataio import MODE_IMAGE, Dataset

CLASSES = ("horizontal", "vertical")


def stripe_image(rows, cols, orientation, stripe_width=2, low=0.25, high=0.75):
    """Noise-free stripe pattern with bands of the given width."""
    if orientation not in CLASSES:
        raise ValueError(f"orientation must be one of {CLASSES}, got {orientation!r}")
    if stripe_width < 1:
        raise ValueError(f"stripe_width must be >= 1, got {stripe_width}")
    axis = np.arange(rows if orientation == "horizontal" else cols)
    band = np.where((axis // stripe_width) % 2 == 0, high, low)
    if orientation == "horizontal":
        return np.tile(band[:, None], (1, cols))
    return np.tile(band[None, :], (rows, 1))


def make_stripes_dataset(rows=16, cols=16, per_class=100, noise=0.1, seed=0,
                         stripe_width=2):
    """Balanced two-class dataset of noisy stripe images.

    Each sample is a clean stripe pattern plus i.i.d. N(0, noise^2)
    pixels; values are kept as floats (not clipped), so the samples stay
    linear in the noise.
    """
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    if noise < 0:
        raise ValueError(f"noise must be nonnegative, got {noise}")
    rng = np.random.default_rng(seed)
    samples, labels = [], []
    for orientation in CLASSES:
        clean = stripe_image(rows, cols, orientation, stripe_width)
        for _ in range(per_class):
            samples.append(clean + noise * rng.standard_normal((rows, cols)))
            labels.append(orientation)
    return Dataset(tuple(samples), tuple(labels), MODE_IMAGE)


def write_image_dataset(dataset, out_dir):
    """Write an image dataset as a class-per-subdirectory tree of PGM files.

    Pixels are clipped to [0, 1] and quantized to 8 bits.
    """
    root = Path(out_dir)
    counters = {}
    for sample, label in zip(dataset.samples, dataset.labels):
        class_dir = root / label
        class_dir.mkdir(parents=True, exist_ok=True)
        idx = counters.get(label, 0)
        counters[label] = idx + 1
        quantized = np.clip(sample, 0.0, 1.0) * 255.0
        img = Image.fromarray(np.round(quantized).astype(np.uint8), mode="L")
        img.save(class_dir / f"sample_{idx:04d}.pgm")
    return root
