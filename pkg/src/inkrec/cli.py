"""Command-line entry points.

Every subcommand prints a JSON document on stdout and, on failure, a
single structured JSON diagnostic on stderr with a nonzero exit code.
A --config file supplies option defaults: flat keys apply everywhere
they fit, a section named after a subcommand applies to that one only.
Explicit flags always win over config values.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .data import (
    ParseError,
    load_ink_json,
    load_inkml,
    save_dataset,
    synth_dataset,
)
from .decoder import DecoderWeights, FeatureFunctionSet
from .experiments import (
    build_features,
    evaluate_bundle,
    sweep,
    sweep_to_csv,
    sweep_to_json,
    train_system,
)
from .ink import EmptyInk, ZeroHeightArea, ink_from_json
from .lm import EmptyCorpus, build_char_lm, build_word_lm, lm_to_json
from .model_io import ModelFormatError
from .net import TrainConfig
from .recognizer import (
    BundleMismatch,
    RecognizerBundle,
    feature_matrix,
    load_bundle,
    recognize,
    save_bundle,
)
from .tuner import SearchSpace, cer_objective, minimize, tuning_report, weights_at

SCHEMA_VERSION = 1


def _fail(code: str, message, *, status: int = 1):
    doc = {"version": SCHEMA_VERSION, "error": {"code": code, "message": str(message)}}
    print(json.dumps(doc), file=sys.stderr)
    raise SystemExit(status)


def _emit(doc: dict, path=None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path and path != "-":
        Path(path).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


class _Parser(argparse.ArgumentParser):
    """argparse with structured stderr instead of free-form usage errors."""

    def error(self, message):
        _fail("usage", message, status=2)


def _read_ink(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail("io_error", exc)
    try:
        return ink_from_json(json.loads(text))
    except json.JSONDecodeError as exc:
        _fail("parse_error", f"{path}: {exc}")


def _load_dataset(path):
    """Manifest JSON, a directory holding one, or InkML file(s)."""
    p = Path(path)
    if p.is_dir():
        manifest = p / "manifest.json"
        if manifest.exists():
            return load_ink_json(manifest)
        return load_inkml(p)
    if p.suffix == ".inkml":
        return load_inkml(p)
    return load_ink_json(p)


def _split_items(dataset, split: str):
    if split not in ("train", "tune", "validation", "test"):
        _fail("invalid_argument", f"unknown split {split!r}")
    items = getattr(dataset, split)
    if not items:
        _fail("invalid_argument", f"split {split!r} is empty")
    return items


def _int_list(text: str):
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        _fail("invalid_argument", f"expected comma-separated integers, got {text!r}")


def _parse_counts(text: str):
    counts = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            _fail("invalid_argument", f"counts need name=value pairs, got {part!r}")
        name, _, value = part.partition("=")
        try:
            counts[name.strip()] = int(value)
        except ValueError:
            _fail("invalid_argument", f"bad count value in {part!r}")
    return counts


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        dropout_rate=args.dropout,
        patience=args.patience,
        eval_every=args.eval_every,
        max_steps=args.max_steps,
        seed=args.seed,
    )


def _add_train_flags(sub) -> None:
    sub.add_argument("--batch-size", type=int, default=8)
    sub.add_argument("--learning-rate", type=float, default=1e-4)
    sub.add_argument("--dropout", type=float, default=0.5)
    sub.add_argument("--patience", type=int, default=20)
    sub.add_argument("--eval-every", type=int, default=100)
    sub.add_argument("--max-steps", type=int, default=100_000)
    sub.add_argument("--seed", type=int, default=0)


# ---------------------------------------------------------------- subcommands


def _cmd_encode(args) -> int:
    ink = _read_ink(args.ink)
    rows = feature_matrix(ink, args.mode)
    _emit(
        {
            "version": SCHEMA_VERSION,
            "input_mode": args.mode,
            "frames": int(rows.shape[0]),
            "rows": [[float(v) for v in row] for row in rows],
        },
        args.out,
    )
    return 0


def _cmd_build_lm(args) -> int:
    try:
        lines = Path(args.corpus).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        _fail("io_error", exc)
    lines = [line for line in lines if line.strip()]
    if args.kind == "char":
        model = build_char_lm(lines, order=args.order or 7, max_ngrams=args.max_ngrams)
    else:
        model = build_word_lm(lines, order=args.order or 3, max_ngrams=args.max_ngrams)
    text = lm_to_json(model, args.kind)
    if args.out and args.out != "-":
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    print(
        json.dumps(
            {
                "version": SCHEMA_VERSION,
                "kind": args.kind,
                "order": model.order,
                "vocabulary": len(model.vocabulary),
            }
        ),
        file=sys.stderr,
    )
    return 0


def _cmd_synth(args) -> int:
    samples = _parse_counts(args.counts) if args.counts else args.samples
    dataset = synth_dataset(
        args.alphabet_size,
        samples,
        seed=args.seed,
        word_symbols=(args.word_min, args.word_max),
        bigram_skew=args.bigram_skew,
        multi_word=args.multi_word,
    )
    manifest = save_dataset(dataset, args.out)
    _emit(
        {
            "version": SCHEMA_VERSION,
            "manifest": str(manifest),
            "counts": {name: len(items) for name, items in dataset.splits().items()},
            "alphabet": "".join(dataset.alphabet),
        }
    )
    return 0


def _cmd_train(args) -> int:
    dataset = _load_dataset(args.data)
    system = train_system(
        dataset,
        input_mode=args.mode,
        layers=args.layers,
        nodes=args.nodes,
        config=_train_config(args),
    )
    if args.with_features:
        features = build_features(dataset.train, system.model.chars)
    else:
        features = FeatureFunctionSet()
    bundle = RecognizerBundle(
        model=system.model,
        features=features,
        weights=DecoderWeights(beam_width=args.beam_width),
        input_mode=args.mode,
    )
    save_bundle(bundle, args.out)
    _emit(
        {
            "version": SCHEMA_VERSION,
            "bundle": str(args.out),
            "best_cer": float(system.best_cer),
            "steps": system.steps,
            "dropped": system.dropped,
        }
    )
    return 0


def _cmd_recognize(args) -> int:
    bundle = load_bundle(args.bundle)
    ink = _read_ink(args.ink)
    result = recognize(bundle, ink, args.n_best)
    _emit(
        {
            "version": SCHEMA_VERSION,
            "text": result.text,
            "n_best": [
                {"text": t, "score": s, "network_score": ns}
                for t, s, ns in result.n_best
            ],
            "timings": result.timings,
        }
    )
    return 0


def _cmd_evaluate(args) -> int:
    bundle = load_bundle(args.bundle)
    dataset = _load_dataset(args.data)
    items = _split_items(dataset, args.split)
    report = evaluate_bundle(bundle, items)
    _emit(
        {
            "version": SCHEMA_VERSION,
            "split": args.split,
            "count": len(items),
            **report.to_dict(),
        },
        args.out,
    )
    return 0


def _cmd_tune(args) -> int:
    bundle = load_bundle(args.bundle)
    dataset = _load_dataset(args.data)
    items = _split_items(dataset, args.split)
    names = []
    if bundle.features.char_lm is not None:
        names.append("char_lm")
    if bundle.features.word_lm is not None:
        names.append("word_lm")
    if bundle.features.char_classes is not None:
        names.append("char_class")
    if not names:
        _fail("invalid_argument", "bundle has no feature functions to tune")
    beam = args.beam_width or bundle.weights.beam_width
    pairs = [
        (feature_matrix(item.ink, bundle.input_mode), item.transcription)
        for item in items
    ]
    space = SearchSpace(tuple(names), ((0.0, 10.0),) * len(names))
    objective = cer_objective(
        bundle.model, pairs, bundle.features, space=space, beam_width=beam
    )
    result = minimize(
        objective,
        space,
        n_studies=args.studies,
        n_trials=args.trials,
        batch=args.batch,
        seed=args.seed,
    )
    weights = weights_at(space, result.best.weights, beam_width=beam)
    if args.report:
        Path(args.report).write_text(
            json.dumps(tuning_report(space, result.trials), indent=2) + "\n",
            encoding="utf-8",
        )
    if args.apply:
        save_bundle(replace(bundle, weights=weights), args.bundle)
    _emit(
        {
            "version": SCHEMA_VERSION,
            "weights": {**weights.as_dict(), "beam_width": beam},
            "best_objective": float(result.best.objective),
            "trials": len(result.trials),
            "applied": bool(args.apply),
        }
    )
    return 0


def _cmd_sweep(args) -> int:
    dataset = _load_dataset(args.data)
    rows = sweep(
        dataset,
        layer_grid=_int_list(args.layers),
        node_grid=_int_list(args.nodes),
        input_types=tuple(m.strip() for m in args.modes.split(",") if m.strip()),
        train_config=_train_config(args),
        tune_studies=args.tune_studies,
        tune_trials=args.tune_trials,
        beam_width=args.beam_width,
        seed=args.seed,
    )
    if args.csv:
        Path(args.csv).write_text(sweep_to_csv(rows), encoding="utf-8")
    if args.json:
        Path(args.json).write_text(
            json.dumps(sweep_to_json(rows), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    _emit({"version": SCHEMA_VERSION, "rows": [asdict(r) for r in rows]})
    return 0


def _bundle_table(specs):
    """name=dir pairs; a bare directory is named after itself."""
    table = {}
    for spec in specs:
        name, sep, path = spec.partition("=")
        if not sep:
            name, path = Path(spec).name, spec
        if not name or not path:
            _fail("invalid_argument", f"bad bundle spec {spec!r}")
        if name in table:
            _fail("invalid_argument", f"duplicate bundle name {name!r}")
        table[name] = load_bundle(path)
    return table


def _cmd_serve(args) -> int:
    from .service import create_app

    table = _bundle_table(args.bundle)
    app = create_app(table, allow_origins=tuple(args.origin or ["*"]))
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------- wiring


def build_parser(config: dict | None = None) -> _Parser:
    config = config or {}
    parser = _Parser(prog="inkrec", description="online handwriting recognition toolkit")
    parser.add_argument("--config", help="JSON file with option defaults")
    subs = parser.add_subparsers(dest="command", required=True)

    def sub(name, func, **kwargs):
        p = subs.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        return p

    p = sub("encode", _cmd_encode, help="turn one ink file into network input rows")
    p.add_argument("ink")
    p.add_argument("--mode", choices=("curves", "raw"), default="curves")
    p.add_argument("--out", default="-")

    p = sub("build-lm", _cmd_build_lm, help="build a backoff language model from text")
    p.add_argument("corpus")
    p.add_argument("--kind", choices=("char", "word"), default="char")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--max-ngrams", type=int, default=None)
    p.add_argument("--out", default="-")

    p = sub("synth", _cmd_synth, help="generate a synthetic labeled dataset")
    p.add_argument("--alphabet-size", type=int, default=5)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--counts", default=None, help="per-split sizes, e.g. train=80,test=20")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--word-min", type=int, default=1)
    p.add_argument("--word-max", type=int, default=8)
    p.add_argument("--bigram-skew", type=float, default=0.0)
    p.add_argument("--multi-word", action="store_true")
    p.add_argument("--out", required=True)

    p = sub("train", _cmd_train, help="train a model and save a recognizer bundle")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=("curves", "raw"), default="curves")
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--nodes", type=int, default=64)
    p.add_argument("--beam-width", type=int, default=16)
    p.add_argument("--with-features", action="store_true",
                   help="attach LMs built from the training transcriptions")
    p.add_argument("--out", required=True)
    _add_train_flags(p)

    p = sub("recognize", _cmd_recognize, help="recognize one ink file")
    p.add_argument("ink")
    p.add_argument("--bundle", required=True)
    p.add_argument("--n-best", type=int, default=1)

    p = sub("evaluate", _cmd_evaluate, help="score a bundle on a dataset split")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", default="-")

    p = sub("tune", _cmd_tune, help="tune decoder weights on a held-out split")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="tune")
    p.add_argument("--studies", type=int, default=3)
    p.add_argument("--trials", type=int, default=60)
    p.add_argument("--batch", type=int, default=4)
    p.add_argument("--beam-width", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None, help="write the full trial log here")
    p.add_argument("--apply", action="store_true",
                   help="write the tuned weights back into the bundle")

    p = sub("sweep", _cmd_sweep, help="train and score an architecture grid")
    p.add_argument("--data", required=True)
    p.add_argument("--layers", default="1,3")
    p.add_argument("--nodes", default="16,64")
    p.add_argument("--modes", default="raw,curves")
    p.add_argument("--tune-studies", type=int, default=1)
    p.add_argument("--tune-trials", type=int, default=12)
    p.add_argument("--beam-width", type=int, default=16)
    p.add_argument("--csv", default=None)
    p.add_argument("--json", default=None)
    _add_train_flags(p)

    p = sub("serve", _cmd_serve, help="run the HTTP recognition service")
    p.add_argument("--bundle", action="append", required=True,
                   help="bundle directory, or name=directory; repeatable")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.add_argument("--origin", action="append", default=None,
                   help="allowed CORS origin; repeatable; default any")

    for name, sp in subs.choices.items():
        section = config.get(name)
        merged = {k: v for k, v in config.items() if not isinstance(v, dict)}
        if isinstance(section, dict):
            merged.update(section)
        dests = {a.dest for a in sp._actions}
        overlay = {k.replace("-", "_"): v for k, v in merged.items()}
        sp.set_defaults(**{k: v for k, v in overlay.items() if k in dests})
    return parser


def _load_config(argv) -> dict:
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return {}
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        _fail("io_error", exc)
    except json.JSONDecodeError as exc:
        _fail("parse_error", f"{path}: {exc}")
    if not isinstance(config, dict):
        _fail("parse_error", f"{path}: config must be a JSON object")
    return config


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser(_load_config(argv))
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        _fail("parse_error", exc)
    except EmptyInk as exc:
        _fail("empty_ink", exc)
    except ZeroHeightArea as exc:
        _fail("zero_height_area", exc)
    except EmptyCorpus as exc:
        _fail("empty_corpus", exc)
    except (ModelFormatError, BundleMismatch) as exc:
        _fail("bad_bundle", exc)
    except (FileNotFoundError, NotADirectoryError, IsADirectoryError) as exc:
        _fail("io_error", exc)
    except ValueError as exc:
        _fail("invalid_argument", exc)
    except OSError as exc:
        _fail("io_error", exc)


if __name__ == "__main__":
    sys.exit(main())
