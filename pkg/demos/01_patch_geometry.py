"""Patch geometry walkthrough.

Shows how a strided convolutional atom turns an image into a patch
matrix: one column per atom-sized window, so convolving every atom with
the image is a single matrix product.
"""

import numpy as np

from convadl import ConvGeometry, build_patch_matrix, extract_patches

# A 48x42 image scanned by 12x12 atoms with stride 6 yields a 7x6 grid
# of windows: 42 patches, each a 144-vector.
geom = ConvGeometry(input_rows=48, input_cols=42, atom_rows=12, atom_cols=12,
                    stride_rows=6, stride_cols=6)
print(f"patch grid : {geom.grid_rows} x {geom.grid_cols}")
print(f"patch count: {geom.patch_count}")
print(f"atom length: {geom.atom_len}")

rng = np.random.default_rng(0)
image = rng.random((48, 42))
patches = extract_patches(image, geom)
print(f"\npatch matrix for one image: {patches.shape[0]} x {patches.shape[1]}")

# Column k is the k-th window scanned row-major over the grid, vectorized
# row-major; the first column is the top-left window.
top_left = image[:12, :12].reshape(-1)
print("first column == vectorized top-left window:",
      bool(np.array_equal(patches[:, 0], top_left)))

# Several samples stack side by side: all patches of sample 1, then 2, ...
batch = build_patch_matrix([image, image * 0.5, image * 0.25], geom)
print(f"\nthree-sample training matrix: {batch.shape[0]} x {batch.shape[1]}")

# Applying a dictionary of 50 atoms is now one matmul per batch.
omega = rng.standard_normal((50, geom.atom_len))
omega /= np.linalg.norm(omega, axis=1, keepdims=True)
responses = omega @ batch
print(f"responses of 50 atoms on 3 samples: {responses.shape[0]} x {responses.shape[1]}")

# 1-D feature vectors use single-column geometry: a 3000-vector split
# into two non-overlapping 1500-long halves.
feat_geom = ConvGeometry(3000, 1, 1500, 1, 1500, 1)
vec = rng.standard_normal((3000, 1))
halves = extract_patches(vec, feat_geom)
print(f"\nfeature mode: {halves.shape[1]} patches of length {halves.shape[0]}")
print("concatenated halves reproduce the vector:",
      bool(np.array_equal(np.concatenate([halves[:, 0], halves[:, 1]]), vec[:, 0])))
