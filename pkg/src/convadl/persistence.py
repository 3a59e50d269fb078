"""Model serialization.

Model file layout (all little-endian):
    magic  "DCADL1\\0" (7 bytes; the trailing digit is the format version)
    u32    mode (0 = image-2D, 1 = feature-1D)
    6 x u32  geometry: input_rows, input_cols, atom_rows, atom_cols,
             stride_rows, stride_cols
    u32    m   (atom count)
    u32    p   (patch count; must match the geometry)
    u32    C   (class count)
    5 x f64  lambda1..lambda4, rho
    C x  { u16 byte length + UTF-8 class name }
    m * atom_len x f64   dictionary rows, row-major
    C * (m*p)    x f64   classifier rows, row-major

Writes are byte-deterministic, so identical models produce identical
files and save -> load -> save round-trips exactly.
"""

import struct

import numpy as np

from .errors import DataError
from .model import AnalysisDictionary, Hyperparams, LinearClassifier
from .patching import ConvGeometry

MODEL_MAGIC = b"DCADL1\0"

_MODE_IMAGE = 0
_MODE_FEATURE = 1


def save_model(dictionary, classifier, hp, path):
    """Serialize a trained (dictionary, classifier, hyperparams) triple."""
    geom = dictionary.geom
    m = dictionary.atom_count
    p = geom.patch_count
    if classifier.w.shape[1] != m * p:
        raise ValueError(
            f"classifier has {classifier.w.shape[1]} columns; dictionary "
            f"geometry implies {m}*{p} = {m * p}"
        )
    mode = _MODE_FEATURE if geom.is_feature_mode else _MODE_IMAGE
    chunks = [
        MODEL_MAGIC,
        struct.pack("<I", mode),
        struct.pack("<6I", geom.input_rows, geom.input_cols, geom.atom_rows,
                    geom.atom_cols, geom.stride_rows, geom.stride_cols),
        struct.pack("<III", m, p, classifier.n_classes),
        struct.pack("<5d", hp.lambda1, hp.lambda2, hp.lambda3, hp.lambda4, hp.rho),
    ]
    for name in classifier.class_names:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"class name too long to encode: {name!r}")
        chunks.append(struct.pack("<H", len(raw)) + raw)
    chunks.append(np.ascontiguousarray(dictionary.omega, dtype="<f8").tobytes())
    chunks.append(np.ascontiguousarray(classifier.w, dtype="<f8").tobytes())
    try:
        with open(path, "wb") as fh:
            fh.write(b"".join(chunks))
    except OSError as exc:
        raise DataError(f"cannot write model file {path}: {exc}") from exc


def load_model(path):
    """Read a model file back into (dictionary, classifier, hyperparams).

    All dimensions are cross-checked on load; truncated or inconsistent
    files are rejected with a message naming the failing field.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read model file {path}: {exc}") from exc

    offset = 0

    def take(count, what):
        nonlocal offset
        if offset + count > len(blob):
            raise DataError(f"{path}: truncated model file while reading {what}")
        chunk = blob[offset:offset + count]
        offset += count
        return chunk

    if take(len(MODEL_MAGIC), "magic") != MODEL_MAGIC:
        raise DataError(f"{path}: not a model file (bad magic/version)")
    (mode,) = struct.unpack("<I", take(4, "mode"))
    if mode not in (_MODE_IMAGE, _MODE_FEATURE):
        raise DataError(f"{path}: unknown mode {mode}")
    geom_fields = struct.unpack("<6I", take(24, "geometry"))
    try:
        geom = ConvGeometry(*(int(v) for v in geom_fields))
    except ValueError as exc:
        raise DataError(f"{path}: invalid geometry: {exc}") from exc
    if mode == _MODE_FEATURE and not geom.is_feature_mode:
        raise DataError(f"{path}: feature-1D mode but geometry is 2-D")
    m, p, n_classes = struct.unpack("<III", take(12, "dimensions"))
    if p != geom.patch_count:
        raise DataError(
            f"{path}: stored patch count {p} is inconsistent with the "
            f"geometry ({geom.patch_count})"
        )
    lam1, lam2, lam3, lam4, rho = struct.unpack("<5d", take(40, "hyperparams"))
    names = []
    for c in range(n_classes):
        (length,) = struct.unpack("<H", take(2, f"class {c} name length"))
        names.append(take(length, f"class {c} name").decode("utf-8"))
    omega = np.frombuffer(
        take(8 * m * geom.atom_len, "dictionary entries"), dtype="<f8"
    ).astype(np.float64).reshape(m, geom.atom_len)
    w = np.frombuffer(
        take(8 * n_classes * m * p, "classifier entries"), dtype="<f8"
    ).astype(np.float64).reshape(n_classes, m * p)
    if offset != len(blob):
        raise DataError(f"{path}: {len(blob) - offset} trailing bytes after payload")

    try:
        dictionary = AnalysisDictionary(omega, geom)
        classifier = LinearClassifier(w, tuple(names))
        # max_iter/tol are not part of the file layout; defaults apply.
        hp = Hyperparams(lambda1=lam1, lambda2=lam2, lambda3=lam3, lambda4=lam4,
                         rho=rho)
    except ValueError as exc:
        raise DataError(f"{path}: invalid model contents: {exc}") from exc
    return dictionary, classifier, hp
