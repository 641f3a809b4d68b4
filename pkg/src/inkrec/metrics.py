"""Edit distance and the derived error rates."""

from __future__ import annotations

import numpy as np


def edit_distance(a, b) -> int:
    """Levenshtein distance between two sequences (unit costs)."""
    a = list(a)
    b = list(b)
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = np.arange(len(b) + 1)
    for i, ca in enumerate(a, start=1):
        cur = np.empty(len(b) + 1, dtype=np.int64)
        cur[0] = i
        for j, cb in enumerate(b, start=1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (ca != cb),
            )
        prev = cur
    return int(prev[-1])


def character_error_rate(references, hypotheses) -> float:
    """Total character edits over total reference characters, as a percentage."""
    refs = list(references)
    hyps = list(hypotheses)
    if len(refs) != len(hyps):
        raise ValueError("reference and hypothesis counts differ")
    edits = sum(edit_distance(h, r) for r, h in zip(refs, hyps))
    chars = sum(len(r) for r in refs)
    return 100.0 * edits / max(chars, 1)


def word_error_rate(references, hypotheses) -> float:
    """Like the character rate but over whitespace-split tokens."""
    refs = [r.split() for r in references]
    hyps = [h.split() for h in hypotheses]
    if len(refs) != len(hyps):
        raise ValueError("reference and hypothesis counts differ")
    edits = sum(edit_distance(h, r) for r, h in zip(refs, hyps))
    words = sum(len(r) for r in refs)
    return 100.0 * edits / max(words, 1)
