"""1-D feature-vector mode.

Pre-extracted feature vectors (e.g. pooled descriptor features reduced
to a few thousand dimensions) train exactly like images: the "atoms"
are long 1-D windows, here two non-overlapping halves of each vector.
"""

import tempfile
from pathlib import Path

import numpy as np

from convadl import ConvGeometry, Dataset, Hyperparams, build_patch_matrix, \
    evaluate, load_feature_file, one_hot_encode, save_feature_file, split, \
    train

# Synthetic 3-class feature vectors: a shared random basis plus a
# class-specific direction.
rng = np.random.default_rng(9)
d, per_class = 300, 30
classes = ("ants", "bees", "cicadas")
directions = rng.standard_normal((len(classes), d))
samples, labels = [], []
for c, name in enumerate(classes):
    for _ in range(per_class):
        vec = directions[c] + 0.8 * rng.standard_normal(d)
        samples.append(vec.reshape(d, 1))
        labels.append(name)
ds = Dataset(tuple(samples), tuple(labels), "feature")

# The binary feature-file format is self-contained (carries its own
# class table), so datasets can be shipped as single files.
workdir = Path(tempfile.mkdtemp())
feature_path = workdir / "features.bin"
save_feature_file(ds, feature_path)
ds = load_feature_file(feature_path)
print(f"feature file: {ds.n} records of dimension {ds.sample_shape[0]}, "
      f"classes {ds.class_names}")

train_ds, test_ds = split(ds, per_class_train=20, seed=9)
geom = ConvGeometry(d, 1, d // 2, 1, d // 2, 1)  # two half-vector windows
print(f"geometry: {geom.patch_count} windows of length {geom.atom_len}")

hp = Hyperparams(lambda1=0.01, lambda2=0.5, lambda3=0.09, lambda4=0.55,
                 max_iter=15)
xbar = build_patch_matrix(train_ds.samples, geom)
y = one_hot_encode(train_ds.labels, train_ds.class_names)
state = train(xbar, y, geom, m=20, hp=hp, seed=9,
              class_names=train_ds.class_names)
print(f"trained {state.iteration} iterations; final objective "
      f"{state.objective_trace[-1]:.3f}")

report = evaluate(test_ds.samples, test_ds.labels,
                  state.dictionary, state.classifier)
print(f"held-out accuracy: {report.accuracy:.4f} "
      f"({report.correct}/{report.n})")
