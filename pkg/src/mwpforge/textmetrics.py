"""Sentence-level BLEU and ROUGE-1/2/L over token sequences."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence


class EmptyReference(ValueError):
    pass


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _f1(overlap: int, hyp_total: int, ref_total: int) -> float:
    if overlap == 0 or hyp_total == 0 or ref_total == 0:
        return 0.0
    p = overlap / hyp_total
    r = overlap / ref_total
    return 2 * p * r / (p + r)


def bleu(hyp: Sequence[str], ref: Sequence[str], max_n: int = 4) -> float:
    """BLEU with brevity penalty; an order with no matches uses add-one counts."""
    if not ref:
        raise EmptyReference("reference is empty")
    if not hyp:
        return 0.0
    log_p = 0.0
    for n in range(1, max_n + 1):
        h, r = ngrams(hyp, n), ngrams(ref, n)
        matches = sum((h & r).values())
        total = sum(h.values())
        if matches == 0:
            matches, total = 1, total + 1
        log_p += math.log(matches / total) / max_n
    bp = 1.0 if len(hyp) > len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return bp * math.exp(log_p)


def rouge_n(hyp: Sequence[str], ref: Sequence[str], n: int) -> float:
    if not ref:
        raise EmptyReference("reference is empty")
    h, r = ngrams(hyp, n), ngrams(ref, n)
    return _f1(sum((h & r).values()), sum(h.values()), sum(r.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(hyp: Sequence[str], ref: Sequence[str]) -> float:
    if not ref:
        raise EmptyReference("reference is empty")
    return _f1(lcs_length(hyp, ref), len(hyp), len(ref))


def score_generation(hyp: Sequence[str], ref: Sequence[str]) -> dict[str, float]:
    return {
        "bleu": bleu(hyp, ref),
        "rouge1": rouge_n(hyp, ref, 1),
        "rouge2": rouge_n(hyp, ref, 2),
        "rougeL": rouge_l(hyp, ref),
    }


def corpus_scores(pairs) -> dict[str, float]:
    """Mean of per-sentence scores over ``(hyp, ref)`` pairs."""
    pairs = list(pairs)
    if not pairs:
        return {"bleu": 0.0, "rouge1": 0.0, "rouge2": 0.0, "rougeL": 0.0}
    totals = Counter()
    for hyp, ref in pairs:
        totals.update(score_generation(hyp, ref))
    return {k: totals[k] / len(pairs) for k in ("bleu", "rouge1", "rouge2", "rougeL")}
