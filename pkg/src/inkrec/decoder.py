"""CTC decoding: greedy collapse and prefix beam search with feature fusion.

The beam search tracks, per text prefix, the log-probability of alignments
ending in blank and in non-blank. Feature functions (character model, word
model, alphabet boost) contribute when a character is emitted, weighted
linearly in log space; the word model fires when a space commits a word.
Ties are broken by lexicographic text order so results are deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .net import greedy_labels, log_softmax

NEG_INF = float("-inf")


class EmptyLogits(ValueError):
    """Decoding requires at least one frame."""


@dataclass(frozen=True)
class DecoderWeights:
    char_lm: float = 0.0
    word_lm: float = 0.0
    char_class: float = 0.0
    beam_width: int = 16

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be at least 1")
        for w in (self.char_lm, self.word_lm, self.char_class):
            if not np.isfinite(w):
                raise ValueError("weights must be finite")

    def as_dict(self):
        return {
            "char_lm": self.char_lm,
            "word_lm": self.word_lm,
            "char_class": self.char_class,
        }


@dataclass(frozen=True)
class FeatureFunctionSet:
    char_lm: object = None
    word_lm: object = None
    char_classes: object = None

    def emission_delta(self, text: str, ch: str, weights: DecoderWeights) -> float:
        """Score contribution of appending ch to text.

        Zero-weight features are skipped entirely so they can never perturb
        a score.
        """
        delta = 0.0
        if weights.char_lm != 0.0 and self.char_lm is not None:
            delta += weights.char_lm * self.char_lm.score(tuple(text), ch)
        if weights.char_class != 0.0 and self.char_classes is not None:
            delta += weights.char_class * self.char_classes.score(ch)
        if weights.word_lm != 0.0 and self.word_lm is not None and ch == " ":
            words = text.split(" ")
            completed = words[-1]
            if completed:
                context = tuple(w for w in words[:-1] if w)
                delta += weights.word_lm * self.word_lm.score(context, completed)
        return delta


NO_FEATURES = FeatureFunctionSet()


@dataclass
class RecognitionResult:
    n_best: list  # (text, combined score, network-only log score)
    timings: dict = field(default_factory=dict)

    @property
    def text(self) -> str:
        return self.n_best[0][0] if self.n_best else ""


def greedy_decode(logits, chars) -> str:
    """Argmax per frame, merge runs, drop blanks, map to text."""
    labels = greedy_labels(np.asarray(logits), blank=len(chars))
    return "".join(chars[i] for i in labels)


def beam_search(
    logits,
    chars,
    features: FeatureFunctionSet = NO_FEATURES,
    weights: DecoderWeights = DecoderWeights(),
    n_best: int = 1,
) -> RecognitionResult:
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] == 0:
        raise EmptyLogits(f"expected (T, C+1) logits, got shape {logits.shape}")
    if logits.shape[1] != len(chars) + 1:
        raise ValueError(
            f"{logits.shape[1]} logit columns for {len(chars)} characters"
        )
    if n_best > weights.beam_width:
        raise ValueError("n_best cannot exceed beam_width")
    start = time.perf_counter()
    log_probs = log_softmax(logits)
    blank = len(chars)

    # prefix -> [p_blank, p_nonblank, feature_score]
    beams = {(): [0.0, NEG_INF, 0.0]}
    for t in range(log_probs.shape[0]):
        row = log_probs[t]
        nxt = {}

        def cell(prefix, feat):
            entry = nxt.get(prefix)
            if entry is None:
                entry = [NEG_INF, NEG_INF, feat]
                nxt[prefix] = entry
            return entry

        for prefix, (p_b, p_nb, feat) in beams.items():
            total = np.logaddexp(p_b, p_nb)
            # stay on blank
            entry = cell(prefix, feat)
            entry[0] = np.logaddexp(entry[0], total + row[blank])
            # stretch the trailing character without emitting
            if prefix:
                entry[1] = np.logaddexp(entry[1], p_nb + row[prefix[-1]])
            for c in range(blank):
                ext = prefix + (c,)
                if prefix and c == prefix[-1]:
                    # only blank-separated alignments start a fresh copy
                    mass = p_b + row[c]
                else:
                    mass = total + row[c]
                if mass == NEG_INF:
                    continue
                entry = nxt.get(ext)
                if entry is None:
                    text = "".join(chars[i] for i in prefix)
                    delta = features.emission_delta(text, chars[c], weights)
                    entry = cell(ext, feat + delta)
                entry[1] = np.logaddexp(entry[1], mass)

        ranked = sorted(
            nxt.items(),
            key=lambda kv: (
                -(np.logaddexp(kv[1][0], kv[1][1]) + kv[1][2]),
                "".join(chars[i] for i in kv[0]),
            ),
        )
        beams = dict(ranked[: weights.beam_width])

    rows = []
    for prefix, (p_b, p_nb, feat) in beams.items():
        network = float(np.logaddexp(p_b, p_nb))
        rows.append(("".join(chars[i] for i in prefix), network + feat, network))
    rows.sort(key=lambda r: (-r[1], r[0]))
    elapsed = time.perf_counter() - start
    return RecognitionResult(n_best=rows[:n_best], timings={"decode_s": elapsed})


def exhaustive_decode(logits, chars, n_best: int = 1) -> RecognitionResult:
    """Reference decoder: exact marginal probability of every label sequence.

    Exponential in T; for tiny verification instances only.
    """
    import itertools

    from .net import InfeasibleLabel, ctc_loss

    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] == 0:
        raise EmptyLogits(f"expected (T, C+1) logits, got shape {logits.shape}")
    T = logits.shape[0]
    C = len(chars)
    rows = []
    for L in range(T + 1):
        for label in itertools.product(range(C), repeat=L):
            try:
                loss, _ = ctc_loss(logits, list(label), blank=C)
            except InfeasibleLabel:
                continue
            text = "".join(chars[i] for i in label)
            rows.append((text, -loss, -loss))
    rows.sort(key=lambda r: (-r[1], r[0]))
    return RecognitionResult(n_best=rows[:n_best])
