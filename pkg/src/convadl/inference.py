"""Encoding and classification of unseen samples.

Encoding is a single strided-patch extraction followed by one matrix
product with the analysis dictionary — no optimization at test time.
The default feeds the raw linear responses to the classifier; optional
soft thresholding reproduces the sparsified representation.
"""

import time
from dataclasses import dataclass

import numpy as np

from .optimizer import soft_threshold
from .patching import extract_patches


@dataclass(frozen=True)
class Prediction:
    class_index: int
    class_name: str
    scores: np.ndarray  # length-C raw classifier scores


@dataclass(frozen=True)
class EvalReport:
    n: int
    correct: int
    accuracy: float
    total_time: float          # wall time of the whole evaluation, seconds
    mean_time_per_sample: float


def encode(sample, dictionary, lambda1=0.0, apply_threshold=False):
    """Code vector of one sample in the stacked per-atom layout (length m*p).

    Entry i*p + k is atom i's response on patch k.  With
    ``apply_threshold`` the responses are shrunk elementwise by lambda1;
    the default returns the raw linear transform.
    """
    patches = extract_patches(sample, dictionary.geom)
    codes = dictionary.omega @ patches  # (m, p)
    if apply_threshold:
        codes = soft_threshold(codes, lambda1)
    return codes.reshape(-1)


def classify(sample, dictionary, classifier, lambda1=0.0, apply_threshold=False):
    """Argmax class of the classifier scores; ties break to the lowest index."""
    code = encode(sample, dictionary, lambda1, apply_threshold)
    if classifier.w.shape[1] != code.shape[0]:
        raise ValueError(
            f"classifier expects codes of length {classifier.w.shape[1]}, "
            f"got {code.shape[0]}"
        )
    scores = classifier.w @ code
    idx = int(np.argmax(scores))
    return Prediction(class_index=idx, class_name=classifier.class_names[idx],
                      scores=scores)


def evaluate(samples, labels, dictionary, classifier, lambda1=0.0,
             apply_threshold=False):
    """Accuracy and per-sample timing over a labelled sample set."""
    if len(samples) == 0:
        raise ValueError("evaluate requires a non-empty sample set")
    if len(samples) != len(labels):
        raise ValueError(
            f"{len(samples)} samples but {len(labels)} labels"
        )
    correct = 0
    start = time.perf_counter()
    for sample, label in zip(samples, labels):
        pred = classify(sample, dictionary, classifier, lambda1, apply_threshold)
        if pred.class_name == str(label):
            correct += 1
    total = time.perf_counter() - start
    n = len(samples)
    return EvalReport(n=n, correct=correct, accuracy=correct / n,
                      total_time=total, mean_time_per_sample=total / n)
