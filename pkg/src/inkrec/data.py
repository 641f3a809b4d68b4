"""Synthetic handwriting data, dataset files, and loaders.

Synthetic items are rendered from a fixed inventory of parametric glyph
templates (lines, arcs, loops, cusps) stored in a versioned JSON file
shipped with the package. A "writer" is a jitter profile: scale, slant,
spacing, speed, sampling density, and noise drawn once per writer id,
which is what lets writer ids partition cleanly across dataset splits.
"""

from __future__ import annotations

import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .ink import Ink, Stroke, WritingArea, ink_from_json, ink_to_json

SPLIT_NAMES = ("train", "tune", "validation", "test")
DEFAULT_FRACTIONS = (0.7, 0.1, 0.1, 0.1)
TEMPLATE_RESOURCE = "glyph_templates_v1.json"

_MAX_WRITERS = 24
_MIN_WRITERS = 4


class ParseError(ValueError):
    """Malformed dataset or ink file, annotated with path, line, and offset."""

    def __init__(self, message, path=None, line=None, offset=None):
        detail = str(message)
        if line is not None:
            detail = f"{detail} (line {line}, offset {offset or 0})"
        if path is not None:
            detail = f"{path}: {detail}"
        super().__init__(detail)
        self.path = None if path is None else str(path)
        self.line = line
        self.offset = offset


@dataclass(frozen=True)
class LabeledInk:
    ink: Ink
    transcription: str
    writer: str | None = None


@dataclass(frozen=True)
class Dataset:
    """Four-way split corpus. Writer ids, where present, never straddle splits."""

    train: tuple = ()
    tune: tuple = ()
    validation: tuple = ()
    test: tuple = ()

    def __post_init__(self):
        for name in SPLIT_NAMES:
            object.__setattr__(self, name, tuple(getattr(self, name)))
        owner = {}
        for name in SPLIT_NAMES:
            for item in getattr(self, name):
                if item.writer is None:
                    continue
                if owner.setdefault(item.writer, name) != name:
                    raise ValueError(
                        f"writer {item.writer!r} appears in both "
                        f"{owner[item.writer]} and {name}"
                    )

    def splits(self) -> dict:
        return {name: getattr(self, name) for name in SPLIT_NAMES}

    def __len__(self) -> int:
        return sum(len(items) for items in self.splits().values())

    @property
    def alphabet(self) -> tuple:
        chars = set()
        for items in self.splits().values():
            for item in items:
                chars.update(item.transcription)
        return tuple(sorted(chars))


# ---------------------------------------------------------------- glyph templates


def load_templates() -> dict:
    """The packaged glyph inventory: {"order": [...], "templates": {...}}."""
    text = (
        resources.files("inkrec").joinpath("data", TEMPLATE_RESOURCE).read_text()
    )
    obj = json.loads(text)
    if obj.get("version") != 1:
        raise ValueError(f"unsupported template version: {obj.get('version')!r}")
    return obj


def _segment_length(seg) -> float:
    if seg["kind"] == "line":
        (x0, y0), (x1, y1) = seg["from"], seg["to"]
        return math.hypot(x1 - x0, y1 - y0)
    if seg["kind"] == "arc":
        sweep = math.radians(abs(seg["end_deg"] - seg["start_deg"]))
        return seg["radius"] * sweep
    raise ValueError(f"unknown segment kind: {seg['kind']!r}")


def _segment_points(seg, n) -> np.ndarray:
    u = np.linspace(0.0, 1.0, n)
    if seg["kind"] == "line":
        a = np.asarray(seg["from"], dtype=np.float64)
        b = np.asarray(seg["to"], dtype=np.float64)
        return a[None, :] + u[:, None] * (b - a)[None, :]
    cx, cy = seg["center"]
    r = seg["radius"]
    ang = np.radians(seg["start_deg"] + u * (seg["end_deg"] - seg["start_deg"]))
    return np.stack([cx + r * np.cos(ang), cy + r * np.sin(ang)], axis=1)


def _sample_stroke(stroke_spec, density) -> np.ndarray:
    """Chain the stroke's segments into one dense (n, 2) polyline."""
    pieces = []
    for i, seg in enumerate(stroke_spec["segments"]):
        n = max(3, int(round(_segment_length(seg) * density)) + 1)
        pts = _segment_points(seg, n)
        # segments share their junction point; keep it once
        pieces.append(pts if i == 0 else pts[1:])
    return np.concatenate(pieces, axis=0)


# ---------------------------------------------------------------- writers


@dataclass(frozen=True)
class WriterProfile:
    writer: str
    scale_x: float
    scale_y: float
    slant: float
    spacing: float
    speed: float
    density: float
    noise: float


def _writer_profile(seed, index) -> WriterProfile:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1000 + index]))
    return WriterProfile(
        writer=f"w{index:03d}",
        scale_x=float(rng.uniform(0.85, 1.15)),
        scale_y=float(rng.uniform(0.85, 1.15)),
        slant=float(rng.uniform(-0.25, 0.25)),
        spacing=float(rng.uniform(0.85, 1.2)),
        speed=float(rng.uniform(1.5, 3.0)),
        density=float(rng.uniform(28.0, 55.0)),
        noise=float(rng.uniform(0.003, 0.012)),
    )


def _allocate_writers(counts) -> dict:
    """Assign disjoint writer index ranges to splits, proportional to size."""
    total = sum(counts.values())
    n_writers = min(_MAX_WRITERS, max(_MIN_WRITERS, total // 40))
    live = [name for name in SPLIT_NAMES if counts[name] > 0]
    n_writers = max(n_writers, len(live))
    shares = {}
    assigned = 0
    for name in live:
        want = max(1, int(n_writers * counts[name] / total))
        shares[name] = want
        assigned += want
    # hand leftovers to the biggest split to keep the totals exact
    if live:
        biggest = max(live, key=lambda n: counts[n])
        shares[biggest] += n_writers - assigned
    ranges = {}
    start = 0
    for name in SPLIT_NAMES:
        size = shares.get(name, 0)
        ranges[name] = list(range(start, start + size))
        start += size
    return ranges


# ---------------------------------------------------------------- item synthesis


def _draw_word(rng, alphabet, word_symbols, bigram_skew) -> str:
    lo, hi = word_symbols
    k = int(rng.integers(lo, hi + 1))
    if bigram_skew <= 0.0:
        return "".join(alphabet[i] for i in rng.integers(len(alphabet), size=k))
    # Markov chain: each symbol prefers its cyclic successor with
    # probability bigram_skew, otherwise the next symbol is uniform.
    out = [alphabet[int(rng.integers(len(alphabet)))]]
    while len(out) < k:
        prev = alphabet.index(out[-1])
        if rng.random() < bigram_skew:
            nxt = (prev + 1) % len(alphabet)
        else:
            nxt = int(rng.integers(len(alphabet)))
        out.append(alphabet[nxt])
    return "".join(out)


def _build_lexicon(seed, alphabet, bigram_skew) -> tuple:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 77]))
    words = []
    while len(words) < 10:
        w = _draw_word(rng, alphabet, (2, 5), bigram_skew)
        if w not in words:
            words.append(w)
    return tuple(words)


def _zipf_weights(n) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1)
    return w / w.sum()


def _render_item(text, templates, profile, rng) -> Ink:
    """Lay glyphs along a baseline with per-item wobble on the writer's habits."""
    sx = profile.scale_x * rng.uniform(0.94, 1.06)
    sy = profile.scale_y * rng.uniform(0.94, 1.06)
    slant = profile.slant + rng.uniform(-0.05, 0.05)
    density = profile.density * rng.uniform(0.9, 1.1)
    strokes = []
    cursor = 0.0
    t_now = float(rng.uniform(0.0, 0.2))
    for ch in text:
        if ch == " ":
            cursor += 0.45 * profile.spacing * sx
            t_now += float(rng.uniform(0.1, 0.25))
            continue
        tpl = templates[ch]
        for stroke_spec in tpl["strokes"]:
            pts = _sample_stroke(stroke_spec, density)
            y = pts[:, 1] * sy
            x = pts[:, 0] * sx + cursor + slant * y
            x = x + rng.normal(0.0, profile.noise, size=x.shape)
            y = y + rng.normal(0.0, profile.noise, size=y.shape)
            gaps = np.hypot(np.diff(x), np.diff(y))
            t = t_now + np.concatenate(([0.0], np.cumsum(gaps))) / profile.speed
            strokes.append(Stroke(np.stack([x, y, t], axis=1)))
            t_now = float(t[-1] + rng.uniform(0.04, 0.12))
        cursor += tpl["width"] * sx * profile.spacing + float(rng.uniform(0.02, 0.08))
    area = WritingArea(-0.15, -0.15, cursor + 0.3, 1.3)
    return Ink(tuple(strokes), area)


def _split_counts(samples) -> dict:
    if isinstance(samples, dict):
        unknown = set(samples) - set(SPLIT_NAMES)
        if unknown:
            raise ValueError(f"unknown split names: {sorted(unknown)}")
        counts = {name: int(samples.get(name, 0)) for name in SPLIT_NAMES}
    else:
        total = int(samples)
        if total < 1:
            raise ValueError("samples must be positive")
        counts = {
            name: int(total * frac)
            for name, frac in zip(SPLIT_NAMES, DEFAULT_FRACTIONS)
        }
        counts["train"] += total - sum(counts.values())
    if any(c < 0 for c in counts.values()):
        raise ValueError("split counts cannot be negative")
    if sum(counts.values()) < 1:
        raise ValueError("dataset would be empty")
    return counts


def synth_dataset(
    alphabet_size: int,
    samples,
    seed: int = 0,
    *,
    word_symbols=(1, 8),
    bigram_skew: float = 0.0,
    multi_word: bool = False,
) -> Dataset:
    """Deterministic synthetic corpus over the first alphabet_size glyphs.

    samples is either a total (split 70/10/10/10) or a per-split count
    mapping. bigram_skew > 0 biases each symbol toward its cyclic
    successor, giving a character LM something to learn; multi_word draws
    one to three words from a small Zipf-weighted lexicon instead of a
    single symbol run.
    """
    spec = load_templates()
    order = spec["order"]
    if not 1 <= alphabet_size <= len(order):
        raise ValueError(f"alphabet_size must be in [1, {len(order)}]")
    alphabet = order[:alphabet_size]
    templates = spec["templates"]
    counts = _split_counts(samples)
    ranges = _allocate_writers(counts)
    profiles = {
        idx: _writer_profile(seed, idx)
        for indices in ranges.values()
        for idx in indices
    }
    lexicon = _build_lexicon(seed, alphabet, bigram_skew) if multi_word else None

    split_items = {}
    for split_idx, name in enumerate(SPLIT_NAMES):
        items = []
        writers = ranges[name]
        for i in range(counts[name]):
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, 3000 + split_idx, i])
            )
            profile = profiles[writers[int(rng.integers(len(writers)))]]
            if multi_word:
                n_words = int(rng.integers(1, 4))
                picks = rng.choice(len(lexicon), size=n_words, p=_zipf_weights(len(lexicon)))
                text = " ".join(lexicon[int(p)] for p in picks)
            else:
                text = _draw_word(rng, alphabet, word_symbols, bigram_skew)
            items.append(
                LabeledInk(_render_item(text, templates, profile, rng), text, profile.writer)
            )
        split_items[name] = tuple(items)
    return Dataset(**split_items)


# ---------------------------------------------------------------- dataset files


def save_dataset(dataset: Dataset, directory) -> Path:
    """One JSONL file per split plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"version": 1, "splits": {}}
    for name, items in dataset.splits().items():
        filename = f"{name}.jsonl"
        with open(directory / filename, "w", encoding="utf-8") as fh:
            for item in items:
                row = {
                    "ink": ink_to_json(item.ink),
                    "transcription": item.transcription,
                }
                if item.writer is not None:
                    row["writer"] = item.writer
                fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
                fh.write("\n")
        manifest["splits"][name] = {"path": filename, "count": len(items)}
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest_path


def load_ink_json(path) -> Dataset:
    """Load a dataset manifest written by save_dataset."""
    path = Path(path)
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(exc, path=path)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno, offset=exc.colno)
    if not isinstance(manifest, dict) or manifest.get("version") != 1:
        raise ParseError("not a version-1 dataset manifest", path=path)
    splits = {}
    for name in SPLIT_NAMES:
        entry = (manifest.get("splits") or {}).get(name)
        if not entry:
            splits[name] = ()
            continue
        split_path = path.parent / entry["path"]
        items = []
        try:
            lines = split_path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ParseError(exc, path=split_path)
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, path=split_path, line=lineno, offset=exc.colno)
            try:
                ink = ink_from_json(row["ink"])
                text = row["transcription"]
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(exc, path=split_path, line=lineno)
            if not isinstance(text, str):
                raise ParseError("transcription must be a string", path=split_path, line=lineno)
            items.append(LabeledInk(ink, text, row.get("writer")))
        if len(items) != entry.get("count", len(items)):
            raise ParseError(
                f"manifest promises {entry['count']} items, file has {len(items)}",
                path=split_path,
            )
        splits[name] = tuple(items)
    return Dataset(**splits)


# ---------------------------------------------------------------- InkML


def _local_tag(tag) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_inkml_file(path) -> LabeledInk:
    try:
        tree = ET.parse(path)
    except ET.ParseError as exc:
        line, offset = exc.position
        raise ParseError(exc.msg if hasattr(exc, "msg") else exc, path=path, line=line, offset=offset)
    root = tree.getroot()
    transcription = None
    writer = None
    for el in root.iter():
        if _local_tag(el.tag) != "annotation":
            continue
        kind = el.get("type", "")
        value = (el.text or "").strip()
        if kind == "transcription":
            transcription = value
        elif kind in ("writerID", "writer"):
            writer = value or None
    strokes = []
    for el in root.iter():
        if _local_tag(el.tag) != "trace":
            continue
        points = []
        for chunk in (el.text or "").split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            parts = chunk.split()
            if len(parts) < 2:
                raise ParseError(f"trace point needs x y [t], got {chunk!r}", path=path)
            try:
                x, y = float(parts[0]), float(parts[1])
                t = float(parts[2]) if len(parts) > 2 else 0.01 * len(points)
            except ValueError:
                raise ParseError(f"non-numeric trace point {chunk!r}", path=path)
            points.append((x, y, t))
        if points:
            strokes.append(Stroke(points))
    if not strokes:
        raise ParseError("no trace elements", path=path)
    if transcription is None:
        raise ParseError("no transcription annotation", path=path)
    return LabeledInk(Ink(tuple(strokes), None), transcription, writer)


def load_inkml(path) -> Dataset:
    """Load one .inkml file, or every .inkml in a directory, as test items.

    Accepts the trace/annotation subset used by line-level corpora:
    comma-separated traces of "x y t" triples plus a transcription
    annotation, with or without XML namespaces.
    """
    path = Path(path)
    files = sorted(path.glob("*.inkml")) if path.is_dir() else [path]
    if not files:
        raise ParseError("no .inkml files found", path=path)
    return Dataset(test=tuple(_parse_inkml_file(f) for f in files))
