"""Convolutional analysis dictionary learning with a joint linear classifier.

A strided convolutional analysis dictionary, a sparse code tensor, and a
one-against-all linear classifier are trained together by block
coordinate descent; test-time encoding is a single matrix product, so
classification stays fast.  See the README and the demos/ scripts for
worked examples.
"""

from .dataio import Dataset, load_feature_file, load_image_dir, \
    save_feature_file, split
from .errors import ConfigError, DataError, NumericalError
from .inference import EvalReport, Prediction, classify, encode, evaluate
from .model import AnalysisDictionary, Hyperparams, LinearClassifier, \
    init_model, one_hot_encode
from .optimizer import TrainState, objective, project_atoms, soft_threshold, \
    train, update_classifier, update_dictionary
from .patching import ConvGeometry, build_patch_matrix, extract_patches, \
    from_bar, from_hat, from_tilde, view_bar, view_hat, view_tilde
from .persistence import load_model, save_model
from .presets import PRESETS, get_preset
from .synth import make_stripes_dataset, stripe_image, write_image_dataset

__version__ = "0.1.0"

__all__ = [
    "AnalysisDictionary", "ConfigError", "ConvGeometry", "DataError",
    "Dataset", "EvalReport", "Hyperparams", "LinearClassifier",
    "NumericalError", "PRESETS", "Prediction", "TrainState",
    "build_patch_matrix", "classify", "encode", "evaluate", "extract_patches",
    "from_bar", "from_hat", "from_tilde", "get_preset", "init_model",
    "load_feature_file", "load_image_dir", "load_model",
    "make_stripes_dataset", "objective", "one_hot_encode", "project_atoms",
    "save_feature_file", "save_model", "soft_threshold", "split",
    "stripe_image", "train", "update_classifier", "update_dictionary",
    "view_bar", "view_hat", "view_tilde", "write_image_dataset",
]
