"""Block-coordinate-descent training of the dictionary/code/classifier triple.

The training objective over the patch matrix X (atom_len, n*p), code
tensor U, classifier W, and dictionary Omega is

    1/2 ||Omega X - U_bar||_F^2  +  lambda1 ||U_hat||_1
    + lambda2/2 ||Y - W U_tilde||_F^2
    + lambda3/2 ||W||_F^2  +  lambda4/2 ||Omega||_F^2,
    subject to ||omega_i||_2^2 <= 1 for every atom row,

where U_bar/U_hat/U_tilde are the three reshapings of the same tensor.
Each iteration takes two gradient steps on the codes (fidelity term,
then classification term), shrinks elementwise with the l1 proximal
operator, then solves the two ridge-regression blocks for W and Omega
in closed form and projects atom rows back onto the unit ball.  The
problem is multi-convex, so the closed-form blocks never increase the
objective and the code steps are plain proximal-gradient descent.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix, frobenius_norm_sq, matmul, solve_spd_right
from .model import AnalysisDictionary, Hyperparams, LinearClassifier, init_model
from .patching import from_bar, from_hat, from_tilde, view_bar, view_hat, view_tilde

# Floor for the denominator of the relative objective change.
_REL_FLOOR = 1e-12


@dataclass
class TrainState:
    """Result of a training run (or one intermediate iteration)."""

    dictionary: AnalysisDictionary
    code: np.ndarray                 # (p, n, m) tensor
    classifier: LinearClassifier
    iteration: int
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0


def soft_threshold(x, theta):
    """Elementwise shrinkage sign(v) * max(|v| - theta, 0)."""
    if theta < 0:
        raise ValueError(f"threshold must be nonnegative, got {theta!r}")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - theta, 0.0)


def objective(xbar, omega, code, w, y, hp):
    """Value of the ridge-augmented training objective at (omega, code, w)."""
    xbar = as_matrix(xbar, "xbar")
    omega = as_matrix(omega, "omega")
    w = as_matrix(w, "w")
    y = as_matrix(y, "y")
    ubar = view_bar(code)
    utilde = view_tilde(code)
    fidelity = 0.5 * frobenius_norm_sq(matmul(omega, xbar) - ubar)
    sparsity = hp.lambda1 * float(np.sum(np.abs(code)))
    classification = 0.5 * hp.lambda2 * frobenius_norm_sq(y - matmul(w, utilde))
    ridge_w = 0.5 * hp.lambda3 * frobenius_norm_sq(w)
    ridge_omega = 0.5 * hp.lambda4 * frobenius_norm_sq(omega)
    return fidelity + sparsity + classification + ridge_w + ridge_omega


def step_code_fidelity(ubar, omega, xbar, rho):
    """Gradient step on the fidelity term: ubar - rho * (ubar - omega @ xbar)."""
    ubar = as_matrix(ubar, "ubar")
    response = matmul(omega, xbar)
    if response.shape != ubar.shape:
        raise ValueError(
            f"ubar shape {ubar.shape} does not match omega @ xbar {response.shape}"
        )
    return ubar - rho * (ubar - response)


def step_code_classifier(utilde, w, y, rho, lambda2):
    """Gradient descent step on the classification term.

    Moves utilde along +W^T (Y - W utilde); descends
    lambda2/2 ||Y - W utilde||_F^2 whenever rho * lambda2 * ||W||_2^2 < 2.
    """
    utilde = as_matrix(utilde, "utilde")
    w = as_matrix(w, "w")
    y = as_matrix(y, "y")
    residual = y - matmul(w, utilde)
    if residual.shape != y.shape:
        raise ValueError("classifier step shapes are inconsistent")
    return utilde + rho * lambda2 * matmul(w.T, residual)


def update_classifier(y, utilde, lambda2, lambda3):
    """Ridge-optimal classifier given the codes.

    Returns the unique minimizer of
    lambda2/2 ||Y - W utilde||_F^2 + lambda3/2 ||W||_F^2,
    i.e. W (lambda2 utilde utilde^T + lambda3 I) = lambda2 Y utilde^T.
    """
    if lambda3 <= 0:
        raise ValueError(f"lambda3 must be > 0, got {lambda3!r}")
    y = as_matrix(y, "y")
    utilde = as_matrix(utilde, "utilde")
    gram = lambda2 * matmul(utilde, utilde.T)
    gram = 0.5 * (gram + gram.T)
    gram[np.diag_indices_from(gram)] += lambda3
    return solve_spd_right(lambda2 * matmul(y, utilde.T), gram)


def update_dictionary(ubar, xbar, lambda4):
    """Ridge-optimal dictionary given the codes (before projection).

    Returns the unique minimizer of
    1/2 ||Omega xbar - ubar||_F^2 + lambda4/2 ||Omega||_F^2,
    i.e. Omega (xbar xbar^T + lambda4 I) = ubar xbar^T.
    """
    if lambda4 <= 0:
        raise ValueError(f"lambda4 must be > 0, got {lambda4!r}")
    ubar = as_matrix(ubar, "ubar")
    xbar = as_matrix(xbar, "xbar")
    gram = matmul(xbar, xbar.T)
    gram = 0.5 * (gram + gram.T)
    gram[np.diag_indices_from(gram)] += lambda4
    return solve_spd_right(matmul(ubar, xbar.T), gram)


def project_atoms(omega):
    """Project atom rows onto the unit l2 ball.

    Rows with norm > 1 are rescaled to norm exactly 1; rows already in
    the ball (including zero rows) are returned unchanged.
    """
    omega = as_matrix(omega, "omega")
    norms = np.linalg.norm(omega, axis=1)
    scale = np.ones_like(norms)
    outside = norms ** 2 > 1.0
    scale[outside] = 1.0 / norms[outside]
    return omega * scale[:, None]


def train(xbar, y, geom, m, hp=None, seed=0, class_names=None, callback=None,
          warm_start=None):
    """Run the full block-coordinate-descent loop.

    Parameters
    ----------
    xbar : (atom_len, n*p) array
        Patch matrix of the training samples (see
        :func:`~convadl.patching.build_patch_matrix`).
    y : (C, n) array
        One-hot label matrix.
    geom : ConvGeometry
        Patch geometry the codes live on.
    m : int
        Number of dictionary atoms.
    hp : Hyperparams, optional
        Training knobs; defaults to :class:`Hyperparams()`.
    seed : int
        Seed for the dictionary initialization.
    class_names : sequence of str, optional
        Labels for the classifier rows; defaults to class_0..class_{C-1}.
    callback : callable, optional
        Called with the :class:`TrainState` after every iteration
        (used by diagnostics and invariant tests).
    warm_start : TrainState, optional
        Resume from an existing state instead of the seeded
        initialization; dimensions must match.

    Returns
    -------
    TrainState
        Final model with the per-iteration objective trace (the trace
        includes the initial objective, so its length is iteration + 1).
    """
    if hp is None:
        hp = Hyperparams()
    xbar = as_matrix(xbar, "xbar")
    y = as_matrix(y, "y")
    p = geom.patch_count
    if xbar.shape[0] != geom.atom_len:
        raise ValueError(
            f"xbar has {xbar.shape[0]} rows but geometry atoms have length {geom.atom_len}"
        )
    if xbar.shape[1] % p != 0:
        raise ValueError(
            f"xbar has {xbar.shape[1]} columns, not a multiple of patch count {p}"
        )
    n = xbar.shape[1] // p
    if y.shape[1] != n:
        raise ValueError(f"y has {y.shape[1]} columns but xbar holds {n} samples")
    n_classes = y.shape[0]
    if class_names is None:
        if warm_start is not None:
            class_names = warm_start.classifier.class_names
        else:
            class_names = tuple(f"class_{i}" for i in range(n_classes))
    if len(class_names) != n_classes:
        raise ValueError(
            f"{len(class_names)} class names given for {n_classes} label rows"
        )

    start = time.perf_counter()
    if warm_start is not None:
        if warm_start.dictionary.geom != geom:
            raise ValueError("warm start geometry does not match")
        if warm_start.dictionary.atom_count != m:
            raise ValueError(
                f"warm start has {warm_start.dictionary.atom_count} atoms, expected {m}"
            )
        if warm_start.code.shape != (p, n, m):
            raise ValueError(
                f"warm start code shape {warm_start.code.shape} does not match "
                f"({p}, {n}, {m})"
            )
        omega = warm_start.dictionary.omega
        w = warm_start.classifier.w
        u = warm_start.code
    else:
        dictionary, classifier = init_model(geom, m, n_classes, seed)
        omega = dictionary.omega
        w = classifier.w
        # Warm-start the codes at the raw analysis responses Omega X.
        u = from_bar(matmul(omega, xbar), p, n, m)

    trace = [objective(xbar, omega, u, w, y, hp)]
    state = TrainState(
        dictionary=AnalysisDictionary(omega, geom), code=u,
        classifier=LinearClassifier(w, class_names),
        iteration=0, objective_trace=trace,
    )

    def _fail(step, exc):
        raise type(exc)(f"iteration {state.iteration + 1}, {step}: {exc}") from exc

    for t in range(hp.max_iter):
        try:
            ubar = step_code_fidelity(view_bar(u), omega, xbar, hp.rho)
            u = from_bar(ubar, p, n, m)
            utilde = step_code_classifier(view_tilde(u), w, y, hp.rho, hp.lambda2)
            u = from_tilde(utilde, p, n, m)
            uhat = soft_threshold(view_hat(u), hp.rho * hp.lambda1)
            u = from_hat(uhat, p, n, m)
            w = update_classifier(y, view_tilde(u), hp.lambda2, hp.lambda3)
            omega = project_atoms(update_dictionary(view_bar(u), xbar, hp.lambda4))
        except (ValueError, ArithmeticError) as exc:
            _fail("code/classifier/dictionary update", exc)

        trace.append(objective(xbar, omega, u, w, y, hp))
        state = TrainState(
            dictionary=AnalysisDictionary(omega, geom),
            code=u,
            classifier=LinearClassifier(w, class_names),
            iteration=t + 1,
            objective_trace=trace,
        )
        if callback is not None:
            callback(state)
        change = abs(trace[-1] - trace[-2]) / max(abs(trace[-2]), _REL_FLOOR)
        if change < hp.tol:
            state.converged = True
            break

    state.wall_time = time.perf_counter() - start
    return state
