"""Experiment drivers: dataset encoding, training, grid sweeps, ablation.

Everything here composes the lower layers; nothing below depends on it.
The sweep emits one row per (input type, layers, nodes, feature set)
cell, and the ablation ladder turns decoder features on cumulatively,
re-tuning the enabled weights at each rung.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .decoder import DecoderWeights, FeatureFunctionSet
from .lm import CharClassSet, build_char_lm, build_word_lm
from .metrics import character_error_rate, edit_distance, word_error_rate
from .model_io import ModelBundle
from .net import NetworkSpec, TrainConfig, train
from .recognizer import INPUT_DIMS, RecognizerBundle, feature_matrix, recognize
from .tuner import SearchSpace, cer_objective, minimize, weights_at

CSV_HEADER = "input_type,layers,nodes,feature_functions,cer,wer,mean_latency_ms"


def encode_split(items, input_mode, chars) -> list:
    """(feature matrix, label list) pairs for one dataset split."""
    index = {c: i for i, c in enumerate(chars)}
    pairs = []
    for item in items:
        feats = feature_matrix(item.ink, input_mode)
        try:
            labels = [index[c] for c in item.transcription]
        except KeyError as exc:
            raise ValueError(
                f"transcription character {exc.args[0]!r} not in charset"
            )
        pairs.append((feats, labels))
    return pairs


def drop_infeasible(pairs):
    """Remove items whose label cannot fit the frame count.

    The alignment lattice needs T >= label length + adjacent repeats;
    aggressive curve compression can violate that for short dense items.
    """
    kept = []
    dropped = 0
    for feats, labels in pairs:
        need = len(labels) + sum(a == b for a, b in zip(labels, labels[1:]))
        if labels and feats.shape[0] >= need:
            kept.append((feats, labels))
        else:
            dropped += 1
    return kept, dropped


@dataclass
class TrainedSystem:
    model: ModelBundle
    history: list
    best_cer: float
    steps: int
    dropped: dict


def train_system(
    dataset,
    *,
    input_mode: str = "curves",
    layers: int = 3,
    nodes: int = 64,
    config: TrainConfig | None = None,
    chars=None,
) -> TrainedSystem:
    """Encode the corpus, train a network, and wrap it as a model bundle.

    Early stopping monitors the validation split when present, else the
    tune split, else a slice of the training data.
    """
    config = config if config is not None else TrainConfig()
    chars = tuple(chars) if chars else dataset.alphabet
    if not dataset.train:
        raise ValueError("dataset has no training split")
    train_pairs, d_train = drop_infeasible(
        encode_split(dataset.train, input_mode, chars)
    )
    eval_items = (
        dataset.validation
        or dataset.tune
        or dataset.train[: max(1, len(dataset.train) // 10)]
    )
    eval_pairs, d_eval = drop_infeasible(encode_split(eval_items, input_mode, chars))
    if not train_pairs or not eval_pairs:
        raise ValueError("no feasible items left after encoding")
    spec = NetworkSpec(INPUT_DIMS[input_mode], layers, nodes, len(chars))
    result = train(spec, train_pairs, config, eval_pairs)
    model = ModelBundle(spec=spec, params=result.params, chars=chars)
    return TrainedSystem(
        model=model,
        history=result.history,
        best_cer=result.best_cer,
        steps=result.steps,
        dropped={"train": d_train, "eval": d_eval},
    )


@dataclass
class EvalReport:
    cer: float
    wer: float
    edit_distances: tuple
    mean_latency_ms: float

    def to_dict(self) -> dict:
        return {
            "cer": self.cer,
            "wer": self.wer,
            "edit_distances": list(self.edit_distances),
            "mean_latency_ms": self.mean_latency_ms,
        }


def evaluate_bundle(bundle: RecognizerBundle, items) -> EvalReport:
    if not items:
        raise ValueError("nothing to evaluate")
    refs, hyps, lats = [], [], []
    for item in items:
        result = recognize(bundle, item.ink, 1)
        refs.append(item.transcription)
        hyps.append(result.text)
        lats.append(result.timings["total_ms"])
    dists = tuple(edit_distance(h, r) for r, h in zip(refs, hyps))
    return EvalReport(
        cer=character_error_rate(refs, hyps),
        wer=word_error_rate(refs, hyps),
        edit_distances=dists,
        mean_latency_ms=float(np.mean(lats)),
    )


def build_features(
    items, chars, *, char_lm_order: int = 7, word_lm_order: int = 3
) -> FeatureFunctionSet:
    """Decoder feature functions learned from a split's transcriptions.

    The word LM only exists when the corpus actually contains spaces; the
    character class is the non-space glyph inventory. Lower LM orders suit
    small corpora whose structure is local (a bigram-skewed corpus needs
    order 2, not 7).
    """
    corpus = [item.transcription for item in items]
    word_lm = (
        build_word_lm(corpus, order=word_lm_order)
        if any(" " in t for t in corpus)
        else None
    )
    return FeatureFunctionSet(
        char_lm=build_char_lm(corpus, order=char_lm_order),
        word_lm=word_lm,
        char_classes=CharClassSet(frozenset(c for c in chars if c != " ")),
    )


def tune_weights(
    model: ModelBundle,
    tune_items,
    features: FeatureFunctionSet,
    names,
    *,
    input_mode: str = "curves",
    studies: int = 3,
    trials: int = 60,
    beam_width: int = 16,
    seed: int = 0,
) -> DecoderWeights:
    """Tune only the named weights on held-out items; the rest stay zero."""
    pairs = [(feature_matrix(it.ink, input_mode), it.transcription) for it in tune_items]
    space = SearchSpace(tuple(names), ((0.0, 10.0),) * len(names))
    objective = cer_objective(
        model, pairs, features, space=space, beam_width=beam_width
    )
    result = minimize(
        objective, space, n_studies=studies, n_trials=trials, seed=seed
    )
    return weights_at(space, result.best.weights, beam_width=beam_width)


# ---------------------------------------------------------------- ablation ladder


def ablation(
    dataset,
    model: ModelBundle | None = None,
    *,
    input_mode: str = "curves",
    train_config: TrainConfig | None = None,
    layers: int = 1,
    nodes: int = 32,
    tune_studies: int = 3,
    tune_trials: int = 60,
    beam_width: int = 16,
    char_lm_order: int = 7,
    seed: int = 0,
) -> dict:
    """Cumulative feature ladder, each rung re-tuned and scored on test.

    Rung order: bare network, then char LM, then character classes, then
    the word LM (that rung only exists when the corpus has spaces).
    """
    if model is None:
        model = train_system(
            dataset,
            input_mode=input_mode,
            layers=layers,
            nodes=nodes,
            config=train_config,
        ).model
    full = build_features(dataset.train, model.chars, char_lm_order=char_lm_order)
    tune_items = dataset.tune or dataset.validation
    if not tune_items:
        raise ValueError("ablation needs a tune or validation split")
    if not dataset.test:
        raise ValueError("ablation needs a test split")

    ladder = [
        ("baseline", FeatureFunctionSet(), ()),
        ("+char_lm", FeatureFunctionSet(char_lm=full.char_lm), ("char_lm",)),
        (
            "+char_classes",
            FeatureFunctionSet(char_lm=full.char_lm, char_classes=full.char_classes),
            ("char_lm", "char_class"),
        ),
    ]
    if full.word_lm is not None:
        ladder.append(("+word_lm", full, ("char_lm", "word_lm", "char_class")))

    rungs = []
    for name, features, tunable in ladder:
        if tunable:
            weights = tune_weights(
                model,
                tune_items,
                features,
                tunable,
                input_mode=input_mode,
                studies=tune_studies,
                trials=tune_trials,
                beam_width=beam_width,
                seed=seed,
            )
        else:
            weights = DecoderWeights(beam_width=beam_width)
        bundle = RecognizerBundle(
            model=model, features=features, weights=weights, input_mode=input_mode
        )
        report = evaluate_bundle(bundle, dataset.test)
        rungs.append(
            {
                "name": name,
                "cer": report.cer,
                "wer": report.wer,
                "mean_latency_ms": report.mean_latency_ms,
                "weights": weights.as_dict(),
            }
        )
    return {"version": 1, "input_mode": input_mode, "rungs": rungs}


# ---------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepRow:
    input_type: str
    layers: int
    nodes: int
    feature_functions: str
    cer: float
    wer: float
    mean_latency_ms: float


def sweep(
    dataset,
    *,
    layer_grid=(1, 3),
    node_grid=(16, 64),
    input_types=("raw", "curves"),
    train_config: TrainConfig | None = None,
    tune_studies: int = 1,
    tune_trials: int = 12,
    beam_width: int = 16,
    seed: int = 0,
) -> list:
    """Train and score every grid cell, bare and with feature functions.

    Each cell gets its own derived training seed so cells are isolated
    but the whole sweep stays deterministic.
    """
    config = train_config if train_config is not None else TrainConfig()
    rows = []
    cell = 0
    for mode in input_types:
        for layers in layer_grid:
            for nodes in node_grid:
                system = train_system(
                    dataset,
                    input_mode=mode,
                    layers=layers,
                    nodes=nodes,
                    config=replace(config, seed=config.seed + cell),
                )
                model = system.model
                bare = RecognizerBundle(
                    model=model,
                    features=FeatureFunctionSet(),
                    weights=DecoderWeights(beam_width=beam_width),
                    input_mode=mode,
                )
                report = evaluate_bundle(bare, dataset.test)
                rows.append(
                    SweepRow(mode, layers, nodes, "none", report.cer, report.wer,
                             report.mean_latency_ms)
                )
                features = build_features(dataset.train, model.chars)
                names = ["char_lm", "char_class"]
                label = "char_lm+char_classes"
                if features.word_lm is not None:
                    names.append("word_lm")
                    label += "+word_lm"
                tune_items = dataset.tune or dataset.validation
                if tune_items:
                    weights = tune_weights(
                        model,
                        tune_items,
                        features,
                        tuple(names),
                        input_mode=mode,
                        studies=tune_studies,
                        trials=tune_trials,
                        beam_width=beam_width,
                        seed=seed + cell,
                    )
                else:
                    weights = DecoderWeights(1.0, 0.0, 0.5, beam_width=beam_width)
                dressed = RecognizerBundle(
                    model=model, features=features, weights=weights, input_mode=mode
                )
                report = evaluate_bundle(dressed, dataset.test)
                rows.append(
                    SweepRow(mode, layers, nodes, label, report.cer, report.wer,
                             report.mean_latency_ms)
                )
                cell += 1
    return rows


def sweep_to_csv(rows) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.input_type},{r.layers},{r.nodes},{r.feature_functions},"
            f"{r.cer:.6g},{r.wer:.6g},{r.mean_latency_ms:.6g}"
        )
    return "\n".join(lines) + "\n"


def sweep_to_json(rows) -> dict:
    """Plot-ready series: CER against node count, one series per
    (input type, layer count, feature set)."""
    series = {}
    for r in rows:
        key = (r.input_type, r.layers, r.feature_functions)
        series.setdefault(key, []).append({"nodes": r.nodes, "cer": r.cer})
    out = []
    for (mode, layers, feats), points in sorted(series.items()):
        out.append(
            {
                "input_type": mode,
                "layers": layers,
                "feature_functions": feats,
                "points": sorted(points, key=lambda p: p["nodes"]),
            }
        )
    return {"version": 1, "series": out}
