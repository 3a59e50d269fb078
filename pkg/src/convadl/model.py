"""Learned artifacts: analysis dictionary, linear classifier, hyperparameters."""

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix
from .patching import ConvGeometry

# Slack on the squared row-norm constraint of dictionary atoms.
NORM_BALL_TOL = 1e-12


@dataclass(frozen=True)
class AnalysisDictionary:
    """Analysis operator: one unit-ball-constrained atom per row.

    ``omega`` is (m, atom_len); row i is the vectorized i-th atom and
    satisfies ||omega_i||_2^2 <= 1 (+ tiny slack).
    """

    omega: np.ndarray
    geom: ConvGeometry

    def __post_init__(self):
        omega = as_matrix(self.omega, "omega")
        if omega.shape[1] != self.geom.atom_len:
            raise ValueError(
                f"omega has {omega.shape[1]} columns but geometry atoms have "
                f"length {self.geom.atom_len}"
            )
        norms_sq = np.sum(omega * omega, axis=1)
        worst = float(np.max(norms_sq))
        if worst > 1.0 + NORM_BALL_TOL:
            raise ValueError(
                f"atom row norm constraint violated: max ||omega_i||^2 = {worst!r}"
            )
        object.__setattr__(self, "omega", omega)

    @property
    def atom_count(self):
        return self.omega.shape[0]


@dataclass(frozen=True)
class LinearClassifier:
    """One-against-all linear classifier over stacked per-atom patch codes.

    ``w`` is (C, m*p); row c scores class ``class_names[c]``.
    """

    w: np.ndarray
    class_names: tuple

    def __post_init__(self):
        w = as_matrix(self.w, "w")
        names = tuple(str(c) for c in self.class_names)
        if len(names) < 2:
            raise ValueError(f"classifier needs at least 2 classes, got {len(names)}")
        if w.shape[0] != len(names):
            raise ValueError(
                f"w has {w.shape[0]} rows but {len(names)} class names were given"
            )
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "class_names", names)

    @property
    def n_classes(self):
        return self.w.shape[0]


@dataclass(frozen=True)
class Hyperparams:
    """Training knobs.

    lambda1 weights the l1 sparsity of the codes, lambda2 the
    classification residual, lambda3/lambda4 the ridge terms of the
    classifier and dictionary closed-form updates (both must be positive
    for those SPD solves to be well-posed).  rho is the learning rate of
    the two gradient steps on the codes; training stops after max_iter
    iterations or when the relative objective change drops below tol.
    """

    lambda1: float = 0.001
    lambda2: float = 0.2
    lambda3: float = 0.1
    lambda4: float = 0.1
    rho: float = 0.1
    max_iter: int = 50
    tol: float = 1e-6

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a nonnegative real, got {v!r}")
        if self.lambda3 <= 0:
            raise ValueError(f"lambda3 must be > 0 for the classifier solve, got {self.lambda3!r}")
        if self.lambda4 <= 0:
            raise ValueError(f"lambda4 must be > 0 for the dictionary solve, got {self.lambda4!r}")
        if not np.isfinite(self.rho) or self.rho <= 0:
            raise ValueError(f"rho must be > 0, got {self.rho!r}")
        if self.max_iter < 0:
            raise ValueError(f"max_iter must be >= 0, got {self.max_iter!r}")
        if not np.isfinite(self.tol) or self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol!r}")


def one_hot_encode(labels, vocabulary):
    """One-hot label matrix: (C, n) with a single 1 per column.

    Column j has its 1 at the vocabulary index of ``labels[j]``.
    """
    vocabulary = [str(v) for v in vocabulary]
    index = {name: i for i, name in enumerate(vocabulary)}
    if len(index) != len(vocabulary):
        raise ValueError("vocabulary contains duplicate class names")
    labels = [str(l) for l in labels]
    unknown = sorted(set(labels) - set(index))
    if unknown:
        raise ValueError(f"labels not in vocabulary: {unknown}")
    if len(labels) == 0:
        raise ValueError("at least one label is required")
    y = np.zeros((len(vocabulary), len(labels)))
    for j, label in enumerate(labels):
        y[index[label], j] = 1.0
    return y


def init_model(geom, m, n_classes, seed=0):
    """Seeded starting point: unit-norm random atoms and a zero classifier.

    Atom rows are standard-normal draws rescaled to unit l2 norm, so the
    ball constraint holds from the first state; the classifier starts at
    zero.  Deterministic for a fixed seed.
    """
    if m < 1:
        raise ValueError(f"atom count m must be >= 1, got {m}")
    if n_classes < 2:
        raise ValueError(f"need at least 2 classes, got {n_classes}")
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((m, geom.atom_len))
    omega /= np.linalg.norm(omega, axis=1, keepdims=True)
    w = np.zeros((n_classes, m * geom.patch_count))
    names = tuple(f"class_{i}" for i in range(n_classes))
    return AnalysisDictionary(omega, geom), LinearClassifier(w, names)
