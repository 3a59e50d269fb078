"""Dense float64 matrix arithmetic and SPD solves.

Thin, contract-checked wrappers over numpy/scipy.  Everything here works
on 2-D float64 arrays ("matrices"); inputs are validated to be finite and
correctly shaped, and the SPD solve enforces its residual bound instead
of trusting the factorization blindly.
"""

import numpy as np
import scipy.linalg

from .errors import NumericalError

# Relative asymmetry tolerated in solve_spd_right's right-hand operator.
SYMMETRY_RTOL = 1e-10

# Relative residual bound enforced on every SPD solve result.
SOLVE_RTOL = 1e-8


def as_matrix(a, name="matrix"):
    """Coerce to a 2-D float64 array, rejecting bad shapes and non-finite entries."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def matmul(a, b):
    """Matrix product a @ b with shape and finiteness checks."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: a is {a.shape[0]}x{a.shape[1]}, "
            f"b is {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def frobenius_norm_sq(a):
    """Sum of squared entries of a."""
    a = as_matrix(a, "a")
    return float(np.sum(a * a))


def solve_spd_right(a, s):
    """Solve M S = A for M, with S symmetric positive-definite.

    Equivalent to A S^{-1} but computed through a Cholesky factorization
    of S rather than an explicit inverse.  The returned M satisfies

        ||M S - A||_F / max(1, ||A||_F) <= 1e-8

    or a :class:`NumericalError` is raised.

    Parameters
    ----------
    a : (r, k) array
        Right-hand side.
    s : (k, k) array
        Symmetric positive-definite operator (e.g. a ridge-regularized
        Gram matrix).
    """
    a = as_matrix(a, "a")
    s = as_matrix(s, "s")
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"s must be square, got {s.shape}")
    if a.shape[1] != s.shape[0]:
        raise ValueError(
            f"solve_spd_right dimension mismatch: a is {a.shape[0]}x{a.shape[1]}, "
            f"s is {s.shape[0]}x{s.shape[1]}"
        )
    s_norm = np.linalg.norm(s)
    asym = np.linalg.norm(s - s.T)
    if asym > SYMMETRY_RTOL * max(1.0, s_norm):
        raise ValueError(
            f"s is not symmetric: ||s - s.T|| = {asym:.3e} exceeds tolerance"
        )
    try:
        # M S = A  <=>  S M^T = A^T (S symmetric), solved via Cholesky.
        cho = scipy.linalg.cho_factor(s, lower=True, check_finite=False)
        m = scipy.linalg.cho_solve(cho, a.T, check_finite=False).T
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SPD factorization failed for {s.shape[0]}x{s.shape[1]} system: {exc}"
        ) from exc
    if not np.all(np.isfinite(m)):
        raise NumericalError("SPD solve produced non-finite entries")
    residual = np.linalg.norm(m @ s - a) / max(1.0, np.linalg.norm(a))
    if residual > SOLVE_RTOL:
        raise NumericalError(
            f"SPD solve residual {residual:.3e} exceeds {SOLVE_RTOL:.0e}; "
            "the system is too ill-conditioned"
        )
    return m
