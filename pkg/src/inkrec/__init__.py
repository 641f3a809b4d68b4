"""Online handwriting recognition toolkit.

Pipeline: ink normalization and resampling, cubic curve feature extraction,
bidirectional LSTM sequence labeling trained with CTC, and a beam-search
decoder that folds in n-gram language model scores. Compute-heavy kernels run
through a compiled extension when available (see inkrec._backend).

The HTTP layer lives in inkrec.service and the command line in inkrec.cli;
neither is imported here so plain library use stays light.
"""

from inkrec.bezier import CurveFeature, encode_ink_curves, scale_time
from inkrec.data import (
    Dataset,
    LabeledInk,
    ParseError,
    load_ink_json,
    load_inkml,
    save_dataset,
    synth_dataset,
)
from inkrec.decoder import (
    DecoderWeights,
    FeatureFunctionSet,
    RecognitionResult,
    beam_search,
    greedy_decode,
)
from inkrec.ink import (
    EmptyInk,
    Ink,
    Stroke,
    TouchPoint,
    WritingArea,
    ZeroHeightArea,
    ink_from_json,
    ink_to_json,
    normalize_ink,
    raw_features,
    resample_equidistant,
    resample_ink,
)
from inkrec.lm import CharClassSet, build_char_lm, build_word_lm
from inkrec.metrics import character_error_rate, edit_distance, word_error_rate
from inkrec.model_io import ModelBundle, load_model, save_model
from inkrec.net import NetworkSpec, TrainConfig, forward, init_parameters, train
from inkrec.recognizer import (
    BundleMismatch,
    RecognizerBundle,
    feature_matrix,
    load_bundle,
    recognize,
    save_bundle,
)
from inkrec.tuner import SearchSpace, minimize, tune

__all__ = [
    "BundleMismatch",
    "CharClassSet",
    "CurveFeature",
    "Dataset",
    "DecoderWeights",
    "EmptyInk",
    "FeatureFunctionSet",
    "Ink",
    "LabeledInk",
    "ModelBundle",
    "NetworkSpec",
    "ParseError",
    "RecognitionResult",
    "RecognizerBundle",
    "Stroke",
    "TouchPoint",
    "TrainConfig",
    "WritingArea",
    "ZeroHeightArea",
    "beam_search",
    "build_char_lm",
    "build_word_lm",
    "character_error_rate",
    "edit_distance",
    "encode_ink_curves",
    "feature_matrix",
    "forward",
    "greedy_decode",
    "ink_from_json",
    "ink_to_json",
    "init_parameters",
    "load_bundle",
    "load_ink_json",
    "load_inkml",
    "load_model",
    "minimize",
    "normalize_ink",
    "raw_features",
    "recognize",
    "resample_equidistant",
    "resample_ink",
    "save_bundle",
    "save_dataset",
    "save_model",
    "scale_time",
    "synth_dataset",
    "train",
    "tune",
    "word_error_rate",
]

__version__ = "0.1.0"
