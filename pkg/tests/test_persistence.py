import numpy as np
import pytest

from convadl.errors import DataError
from convadl.inference import classify
from convadl.model import AnalysisDictionary, Hyperparams, LinearClassifier
from convadl.patching import ConvGeometry
from convadl.persistence import load_model, save_model


def trained_like_model(seed=0, geom=None, m=3, n_classes=2):
    geom = geom or ConvGeometry(6, 6, 2, 2, 2, 2)
    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((m, geom.atom_len))
    omega /= np.linalg.norm(omega, axis=1, keepdims=True) * 1.25
    w = rng.standard_normal((n_classes, m * geom.patch_count))
    names = tuple(f"class {i} é" for i in range(n_classes))  # non-ASCII
    hp = Hyperparams(lambda1=0.003, lambda2=0.25, lambda3=0.12, lambda4=0.07,
                     rho=0.15)
    return AnalysisDictionary(omega, geom), LinearClassifier(w, names), hp


class TestRoundtrip:
    def test_exact_reconstruction(self, tmp_path):
        dictionary, classifier, hp = trained_like_model()
        path = tmp_path / "m.dcadl"
        save_model(dictionary, classifier, hp, path)
        d2, c2, hp2 = load_model(path)
        assert np.array_equal(d2.omega, dictionary.omega)
        assert np.array_equal(c2.w, classifier.w)
        assert c2.class_names == classifier.class_names
        assert d2.geom == dictionary.geom
        assert (hp2.lambda1, hp2.lambda2, hp2.lambda3, hp2.lambda4, hp2.rho) == \
            (hp.lambda1, hp.lambda2, hp.lambda3, hp.lambda4, hp.rho)

    def test_save_is_byte_deterministic(self, tmp_path):
        dictionary, classifier, hp = trained_like_model(1)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_model(dictionary, classifier, hp, p1)
        save_model(dictionary, classifier, hp, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_save_load_save_byte_identical(self, tmp_path):
        dictionary, classifier, hp = trained_like_model(2)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_model(dictionary, classifier, hp, p1)
        save_model(*load_model(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_loaded_model_predicts_identically(self, tmp_path):
        dictionary, classifier, hp = trained_like_model(3)
        path = tmp_path / "m.bin"
        save_model(dictionary, classifier, hp, path)
        d2, c2, _ = load_model(path)
        rng = np.random.default_rng(4)
        for _ in range(100):
            x = rng.standard_normal((6, 6))
            p1 = classify(x, dictionary, classifier)
            p2 = classify(x, d2, c2)
            assert p1.class_index == p2.class_index
            assert np.array_equal(p1.scores, p2.scores)

    def test_feature_mode_roundtrip(self, tmp_path):
        geom = ConvGeometry(12, 1, 4, 1, 4, 1)
        dictionary, classifier, hp = trained_like_model(5, geom=geom)
        path = tmp_path / "f.bin"
        save_model(dictionary, classifier, hp, path)
        d2, _, _ = load_model(path)
        assert d2.geom == geom
        assert d2.geom.is_feature_mode


class TestValidation:
    def test_inconsistent_dims_rejected_before_write(self, tmp_path):
        dictionary, _, hp = trained_like_model()
        bad_clf = LinearClassifier(np.zeros((2, 5)), ("a", "b"))
        path = tmp_path / "never.bin"
        with pytest.raises(ValueError, match="columns"):
            save_model(dictionary, bad_clf, hp, path)
        assert not path.exists()

    def test_corrupted_magic(self, tmp_path):
        dictionary, classifier, hp = trained_like_model()
        path = tmp_path / "m.bin"
        save_model(dictionary, classifier, hp, path)
        blob = bytearray(path.read_bytes())
        blob[0] = ord("X")
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="not a model file"):
            load_model(path)

    def test_truncated_payload(self, tmp_path):
        dictionary, classifier, hp = trained_like_model()
        path = tmp_path / "m.bin"
        save_model(dictionary, classifier, hp, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) - 16])
        with pytest.raises(DataError, match="truncated"):
            load_model(path)

    def test_inconsistent_patch_count_rejected(self, tmp_path):
        dictionary, classifier, hp = trained_like_model()
        path = tmp_path / "m.bin"
        save_model(dictionary, classifier, hp, path)
        blob = bytearray(path.read_bytes())
        # p is the 9th u32 after the 7-byte magic (mode + 6 geom + m, then p)
        p_at = 7 + 4 + 24 + 4
        blob[p_at:p_at + 4] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="patch count"):
            load_model(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        dictionary, classifier, hp = trained_like_model()
        path = tmp_path / "m.bin"
        save_model(dictionary, classifier, hp, path)
        path.write_bytes(path.read_bytes() + b"\0\0")
        with pytest.raises(DataError, match="trailing"):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            load_model(tmp_path / "absent.bin")
