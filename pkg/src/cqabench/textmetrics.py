"""Reference text-overlap metrics: longest-common-subsequence F1 and 4-gram
precision with brevity penalty.

Both operate on lowercased whitespace tokens and return values in [0, 1].
They are implemented from first principles so the test suite can pin them
against hand-computed fixtures.
"""

from __future__ import annotations

import math
from collections import Counter


def _tokens(text: str) -> list[str]:
    return text.lower().split()


def _lcs_len(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(reference: str, candidate: str) -> float:
    """LCS-based F1 between reference and candidate."""
    ref = _tokens(reference)
    cand = _tokens(candidate)
    lcs = _lcs_len(ref, cand)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_4(reference: str, candidate: str) -> float:
    """Geometric mean of 1..4-gram precisions with brevity penalty.

    Zero-match n-gram counts are smoothed add-one (numerator and
    denominator); a candidate too short to form n-grams contributes a
    smoothed precision of 1 so short identical strings still score 1.
    """
    ref = _tokens(reference)
    cand = _tokens(candidate)
    if not cand:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        cand_ngrams = _ngrams(cand, n)
        ref_ngrams = _ngrams(ref, n)
        total = sum(cand_ngrams.values())
        matched = sum(min(c, ref_ngrams[g]) for g, c in cand_ngrams.items())
        if matched == 0:
            p = (matched + 1) / (total + 1)
        else:
            p = matched / total
        log_sum += math.log(p)
    geo = math.exp(log_sum / 4)
    c, r = len(cand), len(ref)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * geo
