"""End-to-end recognition: ink in, ranked transcriptions and stage timings out.

A RecognizerBundle ties together the trained network, the decoder
feature functions, their weights, and the input mode. Bundles persist
as a directory: the binary model container, optional language model
JSON files, and a config that names them.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bezier import encode_ink_curves, scale_time
from .decoder import (
    DecoderWeights,
    FeatureFunctionSet,
    RecognitionResult,
    beam_search,
)
from .ink import Ink, normalize_ink, raw_features, resample_ink
from .lm import CharClassSet, lm_from_json, lm_to_json
from .model_io import ModelBundle, load_model, save_model
from .net import forward

INPUT_DIMS = {"raw": 5, "curves": 10}

MODEL_FILE = "model.inkrec"
CONFIG_FILE = "config.json"
CHAR_LM_FILE = "char_lm.json"
WORD_LM_FILE = "word_lm.json"


class BundleMismatch(ValueError):
    """Model, language models, and input mode disagree."""


@dataclass(frozen=True)
class RecognizerBundle:
    model: ModelBundle
    features: FeatureFunctionSet
    weights: DecoderWeights
    input_mode: str = "curves"

    def __post_init__(self):
        if self.input_mode not in INPUT_DIMS:
            raise BundleMismatch(f"unknown input mode {self.input_mode!r}")
        want = INPUT_DIMS[self.input_mode]
        if self.model.spec.input_dim != want:
            raise BundleMismatch(
                f"{self.input_mode} mode needs input_dim {want}, "
                f"model has {self.model.spec.input_dim}"
            )
        table = set(self.model.chars)
        if self.features.char_lm is not None:
            extra = set(self.features.char_lm.vocabulary) - table
            if extra:
                raise BundleMismatch(
                    f"char LM covers symbols outside the model charset: {sorted(extra)}"
                )
        if self.features.word_lm is not None:
            chars = {c for word in self.features.word_lm.vocabulary for c in word}
            extra = chars - table
            if extra:
                raise BundleMismatch(
                    f"word LM uses characters outside the model charset: {sorted(extra)}"
                )
            if " " not in table:
                raise BundleMismatch("word LM configured but charset has no space")
        if self.features.char_classes is not None:
            extra = set(self.features.char_classes.alphabet) - table
            if extra:
                raise BundleMismatch(
                    f"char class set outside the model charset: {sorted(extra)}"
                )


def feature_matrix(ink: Ink, input_mode: str) -> np.ndarray:
    """Normalize and featurize one ink according to the input mode."""
    if input_mode not in INPUT_DIMS:
        raise ValueError(f"unknown input mode {input_mode!r}")
    norm = normalize_ink(ink)
    if input_mode == "raw":
        return raw_features(resample_ink(norm))
    return encode_ink_curves(scale_time(norm)).to_array()


def recognize(bundle: RecognizerBundle, ink: Ink, n_best: int = 1) -> RecognitionResult:
    """Full pipeline with per-stage wall times in milliseconds."""
    t0 = time.perf_counter()
    norm = normalize_ink(ink)
    t1 = time.perf_counter()
    if bundle.input_mode == "raw":
        feats = raw_features(resample_ink(norm))
    else:
        feats = encode_ink_curves(scale_time(norm)).to_array()
    t2 = time.perf_counter()
    logits = forward(bundle.model.spec, bundle.model.params, feats)
    t3 = time.perf_counter()
    result = beam_search(
        logits, bundle.model.chars, bundle.features, bundle.weights, n_best
    )
    t4 = time.perf_counter()
    result.timings = {
        "normalize_ms": (t1 - t0) * 1000.0,
        "features_ms": (t2 - t1) * 1000.0,
        "forward_ms": (t3 - t2) * 1000.0,
        "decode_ms": (t4 - t3) * 1000.0,
        "total_ms": (time.perf_counter() - t0) * 1000.0,
    }
    return result


# ---------------------------------------------------------------- persistence


def save_bundle(bundle: RecognizerBundle, directory) -> Path:
    """Write the bundle directory; returns the config path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_model(
        directory / MODEL_FILE,
        bundle.model.spec,
        bundle.model.params,
        bundle.model.chars,
    )
    files = {"model": MODEL_FILE}
    if bundle.features.char_lm is not None:
        (directory / CHAR_LM_FILE).write_text(
            lm_to_json(bundle.features.char_lm, "char"), encoding="utf-8"
        )
        files["char_lm"] = CHAR_LM_FILE
    if bundle.features.word_lm is not None:
        (directory / WORD_LM_FILE).write_text(
            lm_to_json(bundle.features.word_lm, "word"), encoding="utf-8"
        )
        files["word_lm"] = WORD_LM_FILE
    classes = None
    if bundle.features.char_classes is not None:
        classes = "".join(sorted(bundle.features.char_classes.alphabet))
    config = {
        "version": 1,
        "input_mode": bundle.input_mode,
        "weights": {
            "char_lm": bundle.weights.char_lm,
            "word_lm": bundle.weights.word_lm,
            "char_class": bundle.weights.char_class,
            "beam_width": bundle.weights.beam_width,
        },
        "char_classes": classes,
        "files": files,
    }
    config_path = directory / CONFIG_FILE
    config_path.write_text(
        json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return config_path


def load_bundle(directory) -> RecognizerBundle:
    directory = Path(directory)
    config_path = directory / CONFIG_FILE
    try:
        config = json.loads(config_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValueError(f"cannot read bundle config: {exc}")
    except json.JSONDecodeError as exc:
        raise ValueError(f"bundle config is not valid JSON: {exc}")
    if config.get("version") != 1:
        raise ValueError(f"unsupported bundle version: {config.get('version')!r}")
    files = config.get("files", {})
    model = load_model(directory / files.get("model", MODEL_FILE))
    char_lm = word_lm = None
    if "char_lm" in files:
        char_lm, kind = lm_from_json(
            (directory / files["char_lm"]).read_text(encoding="utf-8")
        )
        if kind != "char":
            raise ValueError(f"expected a char LM, found {kind!r}")
    if "word_lm" in files:
        word_lm, kind = lm_from_json(
            (directory / files["word_lm"]).read_text(encoding="utf-8")
        )
        if kind != "word":
            raise ValueError(f"expected a word LM, found {kind!r}")
    classes = config.get("char_classes")
    char_classes = None if classes is None else CharClassSet(frozenset(classes))
    w = config.get("weights", {})
    weights = DecoderWeights(
        char_lm=float(w.get("char_lm", 0.0)),
        word_lm=float(w.get("word_lm", 0.0)),
        char_class=float(w.get("char_class", 0.0)),
        beam_width=int(w.get("beam_width", 16)),
    )
    return RecognizerBundle(
        model=model,
        features=FeatureFunctionSet(
            char_lm=char_lm, word_lm=word_lm, char_classes=char_classes
        ),
        weights=weights,
        input_mode=config.get("input_mode", "curves"),
    )
