"""Patch extraction and code-tensor reshaping.

A convolutional analysis atom applied with a stride is equivalent to a
plain matrix product against a patch matrix whose columns are the
vectorized patches.  This module owns that conversion plus the three
matrix views of the per-patch/per-sample/per-atom code tensor:

* ``bar``   (m, n*p): rows are atoms, columns sample-major patch-minor —
  pairs with the patch matrix in the fidelity term.
* ``hat``   (p, m*n): rows are patches, columns atom-fastest per sample —
  the layout the elementwise l1 shrinkage is applied to.
* ``tilde`` (m*p, n): one column per sample, atoms stacked in blocks of
  p — the feature layout the linear classifier consumes.

The canonical tensor is a (p, n, m) float64 array indexed
``u[patch, sample, atom]``; all views are pure index remappings and
round-trip bit-exactly.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .linalg import as_matrix


@dataclass(frozen=True)
class ConvGeometry:
    """Input/atom/stride shapes governing patch extraction.

    1-D feature vectors use ``input_cols = atom_cols = 1``.  When the
    stride does not evenly tile the input, trailing rows/columns are
    dropped (valid-convolution semantics, no zero padding).
    """

    input_rows: int
    input_cols: int
    atom_rows: int
    atom_cols: int
    stride_rows: int
    stride_cols: int

    def __post_init__(self):
        for name in ("input_rows", "input_cols", "atom_rows", "atom_cols",
                     "stride_rows", "stride_cols"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ValueError(f"{name} must be >= 1, got {value}")
        if self.atom_rows > self.input_rows or self.atom_cols > self.input_cols:
            raise ValueError(
                f"atom ({self.atom_rows}x{self.atom_cols}) does not fit in "
                f"input ({self.input_rows}x{self.input_cols})"
            )

    @property
    def grid_rows(self):
        return (self.input_rows - self.atom_rows) // self.stride_rows + 1

    @property
    def grid_cols(self):
        return (self.input_cols - self.atom_cols) // self.stride_cols + 1

    @property
    def patch_count(self):
        """Number of patches p per sample."""
        return self.grid_rows * self.grid_cols

    @property
    def atom_len(self):
        """Length of a vectorized atom/patch."""
        return self.atom_rows * self.atom_cols

    @property
    def is_feature_mode(self):
        """True for 1-D feature-vector geometry (single column, 1-wide atoms)."""
        return self.input_cols == 1 and self.atom_cols == 1


def extract_patches(sample, geom):
    """Vectorized strided patches of one sample as an (atom_len, p) matrix.

    Column k is patch k of the row-major patch grid (grid columns scan
    fastest); within a patch, pixels are vectorized row-major.
    """
    sample = as_matrix(sample, "sample")
    if sample.shape != (geom.input_rows, geom.input_cols):
        raise ValueError(
            f"sample shape {sample.shape} does not match geometry "
            f"({geom.input_rows}, {geom.input_cols})"
        )
    windows = sliding_window_view(sample, (geom.atom_rows, geom.atom_cols))
    windows = windows[::geom.stride_rows, ::geom.stride_cols]
    # (grid_r, grid_c, atom_r, atom_c) -> (p, atom_len), then columns are patches.
    return windows.reshape(geom.patch_count, geom.atom_len).T.copy()


def build_patch_matrix(samples, geom):
    """Stack per-sample patch blocks into the (atom_len, n*p) training matrix.

    Column (j * p + k) is patch k of sample j: all patches of the first
    sample, then the second, and so on.
    """
    if len(samples) == 0:
        raise ValueError("build_patch_matrix requires at least one sample")
    blocks = [extract_patches(s, geom) for s in samples]
    return np.hstack(blocks)


def _check_tensor(u):
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 3:
        raise ValueError(f"code tensor must be 3-D (p, n, m), got ndim={u.ndim}")
    if not np.all(np.isfinite(u)):
        raise ValueError("code tensor contains non-finite entries")
    return u


def view_bar(u):
    """(p, n, m) tensor as the (m, n*p) atoms-by-columns matrix."""
    u = _check_tensor(u)
    p, n, m = u.shape
    return u.transpose(2, 1, 0).reshape(m, n * p)


def view_hat(u):
    """(p, n, m) tensor as the (p, m*n) patches-by-columns matrix (atom-fastest)."""
    u = _check_tensor(u)
    p, n, m = u.shape
    return u.reshape(p, n * m)


def view_tilde(u):
    """(p, n, m) tensor as the (m*p, n) stacked-feature matrix, one column per sample."""
    u = _check_tensor(u)
    p, n, m = u.shape
    return u.transpose(2, 0, 1).reshape(m * p, n)


def _check_view(mat, expected, name):
    mat = as_matrix(mat, name)
    if mat.shape != expected:
        raise ValueError(f"{name} shape {mat.shape} does not match expected {expected}")
    return mat


def from_bar(mat, p, n, m):
    """Inverse of :func:`view_bar`; exact (bit-identical) round trip."""
    mat = _check_view(mat, (m, n * p), "bar matrix")
    return np.ascontiguousarray(mat.reshape(m, n, p).transpose(2, 1, 0))


def from_hat(mat, p, n, m):
    """Inverse of :func:`view_hat`; exact (bit-identical) round trip."""
    mat = _check_view(mat, (p, n * m), "hat matrix")
    return np.ascontiguousarray(mat.reshape(p, n, m))


def from_tilde(mat, p, n, m):
    """Inverse of :func:`view_tilde`; exact (bit-identical) round trip."""
    mat = _check_view(mat, (m * p, n), "tilde matrix")
    return np.ascontiguousarray(mat.reshape(m, p, n).transpose(1, 2, 0))
