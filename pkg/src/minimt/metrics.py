"""Corpus BLEU for evaluation and smoothed sentence BLEU for risk.

Corpus BLEU is the standard BLEU-4: clipped n-gram counts summed over
the whole corpus, geometric mean of the four precisions, brevity
penalty against the closest reference length. Matching is
case-insensitive (string tokens are lowercased first).

The sentence variant smooths by adding 1 to numerator and denominator
of p_n for n >= 2 only, which keeps single-sentence scores away from
hard zeros while leaving unigram precision honest. Scores live in
[0, 1]; multiply by 100 for display.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

__all__ = ["BleuReport", "corpus_bleu", "sentence_bleu_smoothed", "format_bleu_line"]

MAX_ORDER = 4


def _fold(tokens: Sequence) -> tuple:
    return tuple(t.lower() if isinstance(t, str) else t for t in tokens)


def _ngrams(tokens: tuple, n: int) -> Counter:
    return Counter(tokens[i:i + n] for i in range(len(tokens) - n + 1))


def _closest_ref_len(hyp_len: int, ref_lens: Sequence[int]) -> int:
    # Ties prefer the shorter reference.
    return min(ref_lens, key=lambda r: (abs(r - hyp_len), r))


@dataclass
class BleuReport:
    bleu: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_length: int
    ref_length: int

    @property
    def ratio(self) -> float:
        return self.hyp_length / self.ref_length if self.ref_length else 0.0


def corpus_bleu(hyps: Sequence[Sequence], refs: Sequence) -> BleuReport:
    """BLEU-4 over a corpus. ``refs[i]`` is either one reference token
    sequence or a list of alternatives for ``hyps[i]``."""
    if len(hyps) == 0:
        raise ValueError("corpus_bleu: empty corpus")
    if len(hyps) != len(refs):
        raise ValueError(
            f"corpus_bleu: {len(hyps)} hypotheses vs {len(refs)} references")

    matched = [0] * MAX_ORDER
    possible = [0] * MAX_ORDER
    hyp_total = 0
    ref_total = 0
    for hyp, ref in zip(hyps, refs):
        if ref and not isinstance(ref[0], (list, tuple)):
            ref_list = [ref]
        else:
            ref_list = list(ref)
        h = _fold(hyp)
        rs = [_fold(r) for r in ref_list]
        hyp_total += len(h)
        ref_total += _closest_ref_len(len(h), [len(r) for r in rs])
        for n in range(1, MAX_ORDER + 1):
            counts = _ngrams(h, n)
            if not counts:
                continue
            best = Counter()
            for r in rs:
                for gram, c in _ngrams(r, n).items():
                    if c > best[gram]:
                        best[gram] = c
            possible[n - 1] += max(len(h) - n + 1, 0)
            for gram, c in counts.items():
                matched[n - 1] += min(c, best[gram])

    precisions = tuple(
        (matched[i] / possible[i]) if possible[i] > 0 else 0.0
        for i in range(MAX_ORDER))
    if hyp_total == 0:
        bp = 0.0
    else:
        bp = min(1.0, math.exp(1.0 - ref_total / hyp_total))
    # Orders with no possible n-grams anywhere in the corpus (every
    # hypothesis shorter than n) drop out of the geometric mean, so a
    # perfect one-token corpus still scores 1. A genuine zero precision
    # (possible > 0, no matches) zeroes the whole score.
    active = [i for i in range(MAX_ORDER) if possible[i] > 0]
    if active and all(matched[i] > 0 for i in active):
        log_mean = sum(math.log(precisions[i]) for i in active) / len(active)
        bleu = bp * math.exp(log_mean)
    else:
        bleu = 0.0
    return BleuReport(bleu, precisions, bp, hyp_total, ref_total)


def sentence_bleu_smoothed(hyp: Sequence, ref: Sequence) -> float:
    """Add-1 smoothed BLEU-4 for a single sentence pair.

    Smoothing applies to n >= 2 only. An empty hypothesis scores 0.0 by
    definition; an empty reference is a caller error.
    """
    if len(ref) == 0:
        raise ValueError("sentence_bleu_smoothed: empty reference")
    h = _fold(hyp)
    r = _fold(ref)
    if len(h) == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, MAX_ORDER + 1):
        counts = _ngrams(h, n)
        ref_counts = _ngrams(r, n)
        match = sum(min(c, ref_counts[g]) for g, c in counts.items())
        total = max(len(h) - n + 1, 0)
        if n >= 2:
            match += 1
            total += 1
        if match == 0 or total == 0:
            return 0.0
        log_sum += math.log(match / total)
    bp = min(1.0, math.exp(1.0 - len(r) / len(h)))
    return bp * math.exp(log_sum / MAX_ORDER)


def format_bleu_line(report: BleuReport) -> str:
    """One machine-parseable evaluation line, score scaled by 100."""
    p = "/".join(f"{x * 100:.1f}" for x in report.precisions)
    return (f"BLEU = {report.bleu * 100:.2f} ({p}, BP={report.brevity_penalty:.3f}, "
            f"ratio={report.ratio:.3f})")
