"""Decoding feature functions: backoff n-gram models and alphabet boosts.

Both language models use the stupid-backoff score: the raw count ratio when
the full n-gram was seen, otherwise 0.4 times the score of the shortened
context. Unigrams fall back to a floor that gives every symbol nonzero
mass, so every score is a finite natural log. Scores are not normalized
probabilities.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

BACKOFF = 0.4


class EmptyCorpus(ValueError):
    """Building a language model requires at least one symbol."""


def _count_ngrams(sequences, order, max_ngrams):
    counts = [dict() for _ in range(order)]
    total = 0
    for seq in sequences:
        total += len(seq)
        for n in range(1, order + 1):
            bucket = counts[n - 1]
            for i in range(len(seq) - n + 1):
                gram = tuple(seq[i : i + n])
                bucket[gram] = bucket.get(gram, 0) + 1
    if total == 0:
        raise EmptyCorpus("corpus has no symbols")
    if max_ngrams is not None and order >= 1 and len(counts[-1]) > max_ngrams:
        # keep the most frequent top-order grams; ties fall to the
        # lexicographically smaller gram
        kept = sorted(counts[-1].items(), key=lambda kv: (-kv[1], kv[0]))
        counts[-1] = dict(kept[:max_ngrams])
    return counts, total


@dataclass(frozen=True)
class BackoffModel:
    """Shared n-gram scorer; symbols are codepoints or word tokens."""

    order: int
    counts: tuple  # counts[n-1]: dict mapping n-tuples to frequencies
    total: int
    vocabulary: frozenset

    def score(self, context, symbol) -> float:
        context = tuple(context)[max(0, len(context) - (self.order - 1)) :]
        factor_log = 0.0
        for k in range(len(context), 0, -1):
            ctx = context[len(context) - k :]
            gram = ctx + (symbol,)
            if k + 1 <= self.order:
                num = self.counts[k].get(gram, 0)
                if num > 0:
                    den = self.counts[k - 1][ctx]
                    return factor_log + math.log(num / den)
            factor_log += math.log(BACKOFF)
        uni = self.counts[0].get((symbol,), 0)
        if uni > 0:
            return factor_log + math.log(uni / self.total)
        floor = 1.0 / (max(len(self.vocabulary), 1) * self.total)
        return factor_log + math.log(floor)


def _build(sequences, order, max_ngrams):
    if order < 1:
        raise ValueError("order must be at least 1")
    counts, total = _count_ngrams(sequences, order, max_ngrams)
    vocab = frozenset(g[0] for g in counts[0])
    return BackoffModel(
        order=order,
        counts=tuple(counts),
        total=total,
        vocabulary=vocab,
    )


def _as_lines(corpus):
    if isinstance(corpus, str):
        return corpus.splitlines() or [corpus]
    return list(corpus)


def build_char_lm(corpus, order=7, max_ngrams=None) -> BackoffModel:
    """Character model; n-grams never cross line boundaries."""
    lines = [line for line in _as_lines(corpus)]
    return _build(lines, order, max_ngrams)


def build_word_lm(corpus, order=3, max_ngrams=None) -> BackoffModel:
    """Word model over whitespace tokens, line by line."""
    lines = [line.split() for line in _as_lines(corpus)]
    return _build(lines, order, max_ngrams)


@dataclass(frozen=True)
class CharClassSet:
    """Indicator feature: unit boost for in-alphabet characters."""

    alphabet: frozenset = field(default_factory=frozenset)

    def score(self, ch) -> float:
        return 1.0 if ch in self.alphabet else 0.0


# ---------------------------------------------------------------- persistence


def lm_to_json(model: BackoffModel, kind: str) -> str:
    if kind not in ("char", "word"):
        raise ValueError("kind must be 'char' or 'word'")
    payload = {
        "kind": kind,
        "order": model.order,
        "backoff": BACKOFF,
        "total": model.total,
        "vocabulary": sorted(model.vocabulary),
        "ngrams": [
            [list(gram), count]
            for bucket in model.counts
            for gram, count in sorted(bucket.items())
        ],
    }
    return json.dumps(payload, ensure_ascii=False)


def lm_from_json(text: str) -> tuple:
    try:
        payload = json.loads(text)
        order = int(payload["order"])
        total = int(payload["total"])
        kind = payload["kind"]
        grams = payload["ngrams"]
        vocab = payload["vocabulary"]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed language model file: {exc}")
    if kind not in ("char", "word"):
        raise ValueError(f"unknown language model kind {kind!r}")
    counts = [dict() for _ in range(order)]
    for gram, count in grams:
        gram = tuple(gram)
        if not (1 <= len(gram) <= order):
            raise ValueError("n-gram length outside model order")
        counts[len(gram) - 1][gram] = int(count)
    model = BackoffModel(
        order=order,
        counts=tuple(counts),
        total=total,
        vocabulary=frozenset(vocab),
    )
    return model, kind
