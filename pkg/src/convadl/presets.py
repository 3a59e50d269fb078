"""Named benchmark configurations.

Each preset bundles the geometry, dictionary size, and training knobs
used for one of the four standard benchmarks this model family is
evaluated on (face images at fixed crops, and 3000-dimensional
pre-extracted feature vectors split into two half-vector atoms).
"""

from dataclasses import dataclass

from .model import Hyperparams
from .patching import ConvGeometry


@dataclass(frozen=True)
class Preset:
    name: str
    geom: ConvGeometry
    m: int
    hyperparams: Hyperparams
    mode: str  # "image" or "feature"


PRESETS = {
    "yaleb": Preset(
        name="yaleb",
        geom=ConvGeometry(48, 42, 12, 12, 6, 6),
        m=50,
        hyperparams=Hyperparams(lambda1=0.001, lambda2=0.2, lambda3=0.1,
                                lambda4=0.1, max_iter=23),
        mode="image",
    ),
    "ar": Preset(
        name="ar",
        geom=ConvGeometry(55, 40, 12, 12, 6, 6),
        m=50,
        hyperparams=Hyperparams(lambda1=0.0001, lambda2=0.005, lambda3=0.0001,
                                lambda4=1.3, max_iter=37),
        mode="image",
    ),
    "caltech101": Preset(
        name="caltech101",
        geom=ConvGeometry(3000, 1, 1500, 1, 1500, 1),
        m=152,
        hyperparams=Hyperparams(lambda1=0.0001, lambda2=0.01, lambda3=0.006,
                                lambda4=0.15, max_iter=48),
        mode="feature",
    ),
    "scene15": Preset(
        name="scene15",
        geom=ConvGeometry(3000, 1, 1500, 1, 1500, 1),
        m=100,
        hyperparams=Hyperparams(lambda1=0.01, lambda2=0.5, lambda3=0.09,
                                lambda4=0.55, max_iter=15),
        mode="feature",
    ),
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ValueError(f"unknown preset {name!r}; known presets: {known}") from None
