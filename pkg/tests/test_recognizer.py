import numpy as np
import pytest

from inkrec.data import synth_dataset
from inkrec.decoder import DecoderWeights, FeatureFunctionSet
from inkrec.lm import CharClassSet, build_char_lm, build_word_lm
from inkrec.model_io import ModelBundle
from inkrec.net import NetworkSpec, init_parameters
from inkrec.recognizer import (
    BundleMismatch,
    RecognizerBundle,
    feature_matrix,
    load_bundle,
    recognize,
    save_bundle,
)

CHARS = ("l", "o", "v")


def make_model(input_dim=10, chars=CHARS, seed=0):
    spec = NetworkSpec(
        input_dim=input_dim, layers=1, nodes_per_layer=6, num_classes=len(chars)
    )
    return ModelBundle(spec=spec, params=init_parameters(spec, seed=seed), chars=chars)


def make_bundle(**kwargs):
    defaults = dict(
        model=make_model(),
        features=FeatureFunctionSet(),
        weights=DecoderWeights(beam_width=4),
        input_mode="curves",
    )
    defaults.update(kwargs)
    return RecognizerBundle(**defaults)


def sample_ink(seed=0):
    return synth_dataset(3, {"test": 1}, seed=seed).test[0].ink


class TestBundleValidation:
    def test_mode_must_match_model_width(self):
        with pytest.raises(BundleMismatch, match="input_dim"):
            make_bundle(model=make_model(input_dim=5))
        make_bundle(model=make_model(input_dim=5), input_mode="raw")

    def test_unknown_mode(self):
        with pytest.raises(BundleMismatch, match="input mode"):
            make_bundle(input_mode="hybrid")

    def test_char_lm_vocabulary_must_fit_charset(self):
        lm = build_char_lm(["lox"])
        with pytest.raises(BundleMismatch, match="x"):
            make_bundle(features=FeatureFunctionSet(char_lm=lm))
        make_bundle(features=FeatureFunctionSet(char_lm=build_char_lm(["lol"])))

    def test_word_lm_needs_space_and_known_chars(self):
        words = build_word_lm(["lo lo vo"])
        with pytest.raises(BundleMismatch, match="space"):
            make_bundle(features=FeatureFunctionSet(word_lm=words))
        spaced = make_model(chars=("l", "o", "v", " "))
        make_bundle(model=spaced, features=FeatureFunctionSet(word_lm=words))
        with pytest.raises(BundleMismatch, match="charset"):
            make_bundle(
                model=spaced,
                features=FeatureFunctionSet(word_lm=build_word_lm(["zap"])),
            )

    def test_class_set_must_fit_charset(self):
        with pytest.raises(BundleMismatch):
            make_bundle(features=FeatureFunctionSet(char_classes=CharClassSet(frozenset("q"))))
        make_bundle(features=FeatureFunctionSet(char_classes=CharClassSet(frozenset("lo"))))


class TestFeatureMatrix:
    def test_raw_and_curve_widths(self):
        ink = sample_ink()
        raw = feature_matrix(ink, "raw")
        curves = feature_matrix(ink, "curves")
        assert raw.shape[1] == 5 and raw.shape[0] > 0
        assert curves.shape[1] == 10 and curves.shape[0] > 0

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            feature_matrix(sample_ink(), "spline")


class TestRecognize:
    def test_result_carries_stage_timings(self):
        result = recognize(make_bundle(), sample_ink(), n_best=2)
        keys = {"normalize_ms", "features_ms", "forward_ms", "decode_ms", "total_ms"}
        assert set(result.timings) == keys
        assert all(v >= 0.0 for v in result.timings.values())
        stages = sum(v for k, v in result.timings.items() if k != "total_ms")
        assert result.timings["total_ms"] >= stages - 1.0
        assert len(result.n_best) <= 2

    def test_same_ink_same_bundle_same_answer(self):
        bundle = make_bundle()
        ink = sample_ink(3)
        a = recognize(bundle, ink, n_best=3)
        b = recognize(bundle, ink, n_best=3)
        assert a.n_best == b.n_best

    def test_raw_mode_runs(self):
        bundle = make_bundle(model=make_model(input_dim=5), input_mode="raw")
        result = recognize(bundle, sample_ink(1))
        assert isinstance(result.text, str)


class TestPersistence:
    def round_trip(self, tmp_path, bundle):
        save_bundle(bundle, tmp_path / "bundle")
        return load_bundle(tmp_path / "bundle")

    def test_round_trip_preserves_config(self, tmp_path):
        chars = ("l", "o", "v", " ")
        bundle = RecognizerBundle(
            model=make_model(chars=chars),
            features=FeatureFunctionSet(
                char_lm=build_char_lm(["lo ol vol"]),
                word_lm=build_word_lm(["lo ol vol"]),
                char_classes=CharClassSet(frozenset("lo")),
            ),
            weights=DecoderWeights(1.5, 0.5, 0.25, beam_width=8),
            input_mode="curves",
        )
        loaded = self.round_trip(tmp_path, bundle)
        assert loaded.weights == bundle.weights
        assert loaded.input_mode == "curves"
        assert loaded.model.chars == chars
        assert loaded.features.char_lm == bundle.features.char_lm
        assert loaded.features.word_lm == bundle.features.word_lm
        assert loaded.features.char_classes == bundle.features.char_classes

    def test_loaded_bundle_recognition_is_stable(self, tmp_path):
        bundle = make_bundle()
        ink = sample_ink(5)
        loaded = self.round_trip(tmp_path, bundle)
        again = load_bundle(tmp_path / "bundle")
        assert recognize(loaded, ink, 2).n_best == recognize(again, ink, 2).n_best
        # container stores tensors in 32-bit, so scores only match loosely
        a = recognize(bundle, ink, 1)
        b = recognize(loaded, ink, 1)
        assert a.text == b.text
        assert a.n_best[0][1] == pytest.approx(b.n_best[0][1], abs=1e-3)

    def test_missing_config(self, tmp_path):
        with pytest.raises(ValueError, match="config"):
            load_bundle(tmp_path)

    def test_bad_version(self, tmp_path):
        bundle = make_bundle()
        save_bundle(bundle, tmp_path / "b")
        cfg = tmp_path / "b" / "config.json"
        cfg.write_text(cfg.read_text().replace('"version": 1', '"version": 9'))
        with pytest.raises(ValueError, match="version"):
            load_bundle(tmp_path / "b")

    def test_wrong_lm_kind_detected(self, tmp_path):
        chars = ("l", "o", "v", " ")
        bundle = RecognizerBundle(
            model=make_model(chars=chars),
            features=FeatureFunctionSet(char_lm=build_char_lm(["lov"])),
            weights=DecoderWeights(beam_width=4),
        )
        save_bundle(bundle, tmp_path / "b")
        from inkrec.lm import build_word_lm, lm_to_json

        (tmp_path / "b" / "char_lm.json").write_text(
            lm_to_json(build_word_lm(["lo vo"]), "word")
        )
        with pytest.raises(ValueError, match="char"):
            load_bundle(tmp_path / "b")
