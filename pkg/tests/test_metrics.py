import itertools
import math
from collections import Counter

import numpy as np
import pytest

from minimt.metrics import (
    BleuReport,
    corpus_bleu,
    format_bleu_line,
    sentence_bleu_smoothed,
)


def bleu_brute_force(hyps, refs):
    """Independent corpus BLEU: position-by-position n-gram matching with
    explicit clipping, no Counter shortcuts."""
    matched = [0] * 4
    possible = [0] * 4
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        h = [w.lower() if isinstance(w, str) else w for w in hyp]
        r = [w.lower() if isinstance(w, str) else w for w in ref]
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, 5):
            hgrams = [tuple(h[i:i + n]) for i in range(len(h) - n + 1)]
            rgrams = [tuple(r[i:i + n]) for i in range(len(r) - n + 1)]
            possible[n - 1] += len(hgrams)
            for gram in set(hgrams):
                matched[n - 1] += min(hgrams.count(gram), rgrams.count(gram))
    ps = [matched[i] / possible[i] if possible[i] else 0.0 for i in range(4)]
    if min(ps) == 0.0:
        return 0.0
    bp = min(1.0, math.exp(1.0 - ref_len / hyp_len)) if hyp_len else 0.0
    return bp * math.exp(sum(math.log(p) for p in ps) / 4.0)


class TestCorpusBleu:
    def test_identity(self):
        hyps = [["the", "cat", "sat", "down"], ["a", "b", "c", "d", "e"]]
        rep = corpus_bleu(hyps, hyps)
        assert rep.bleu == 1.0
        assert rep.brevity_penalty == 1.0

    def test_clipping_classic(self):
        hyp = ["the"] * 7
        ref = ["the", "cat", "is", "on", "the", "mat"]
        rep = corpus_bleu([hyp], [ref])
        assert rep.precisions[0] == pytest.approx(2 / 7)
        assert rep.precisions[1] == 0.0
        assert rep.bleu == 0.0

    def test_case_insensitive(self):
        rep = corpus_bleu([["The", "CAT", "Sat", "Here"]],
                          [["the", "cat", "sat", "here"]])
        assert rep.bleu == 1.0

    def test_empty_corpus_errors(self):
        with pytest.raises(ValueError, match="empty"):
            corpus_bleu([], [])

    def test_multi_reference_and_closest_length(self):
        hyp = ["a", "b", "c"]
        refs = [[["a", "b", "c", "d", "e"], ["a", "b", "x"]]]
        rep = corpus_bleu([hyp], refs)
        assert rep.ref_length == 3  # closest reference
        assert rep.precisions[0] == pytest.approx(1.0)

    def test_pair_order_invariance(self):
        rng = np.random.default_rng(5)
        vocab = list("abcdefg")
        pairs = []
        for _ in range(8):
            n = rng.integers(3, 9)
            hyp = [vocab[i] for i in rng.integers(0, len(vocab), n)]
            ref = [vocab[i] for i in rng.integers(0, len(vocab), n)]
            pairs.append((hyp, ref))
        fwd = corpus_bleu([p[0] for p in pairs], [p[1] for p in pairs])
        rev_pairs = pairs[::-1]
        rev = corpus_bleu([p[0] for p in rev_pairs], [p[1] for p in rev_pairs])
        assert fwd.bleu == pytest.approx(rev.bleu, abs=1e-15)

    def test_matches_brute_force_on_random_pairs(self):
        rng = np.random.default_rng(17)
        vocab = list("abcde")
        hyps, refs = [], []
        for _ in range(20):
            hyps.append([vocab[i] for i in rng.integers(0, 5, rng.integers(4, 12))])
            refs.append([vocab[i] for i in rng.integers(0, 5, rng.integers(4, 12))])
        rep = corpus_bleu(hyps, refs)
        assert rep.bleu == pytest.approx(bleu_brute_force(hyps, refs), abs=1e-12)

    def test_bounds(self):
        rng = np.random.default_rng(23)
        for seed in range(5):
            hyp = [str(i) for i in rng.integers(0, 4, 6)]
            ref = [str(i) for i in rng.integers(0, 4, 6)]
            rep = corpus_bleu([hyp], [ref])
            assert 0.0 <= rep.bleu <= 1.0


class TestSentenceBleu:
    def test_exact_match_is_one(self):
        s = ["w1", "w2", "w3", "w4", "w5"]
        assert sentence_bleu_smoothed(s, s) == pytest.approx(1.0)

    def test_empty_hyp_is_zero(self):
        assert sentence_bleu_smoothed([], ["a"]) == 0.0

    def test_hand_computed_smoothing(self):
        # p1=2/3, p2=(1+1)/(2+1), p3=(0+1)/(1+1), p4=(0+1)/(0+1), BP=1
        expected = (2 / 3 * 2 / 3 * 1 / 2 * 1.0) ** 0.25
        got = sentence_bleu_smoothed(["a", "b", "c"], ["a", "b", "d"])
        assert got == pytest.approx(expected, abs=1e-12)

    def test_identity_for_any_nonempty(self):
        for toks in (["x"], ["x", "y"], list("abcdefgh")):
            assert sentence_bleu_smoothed(toks, toks) == pytest.approx(1.0)
            assert corpus_bleu([toks], [toks]).bleu == pytest.approx(1.0)

    def test_removing_a_match_never_helps(self):
        ref = ["a", "b", "c"]
        base = sentence_bleu_smoothed(["a", "b", "c"], ref)
        for i, repl in itertools.product(range(3), ["z", "q"]):
            worse = list(ref)
            worse[i] = repl
            assert sentence_bleu_smoothed(worse, ref) <= base + 1e-12

    def test_works_on_integer_ids(self):
        assert sentence_bleu_smoothed([4, 5, 6, 2], [4, 5, 6, 2]) == pytest.approx(1.0)


def test_format_bleu_line():
    rep = BleuReport(0.3412, (0.652, 0.413, 0.280, 0.195), 0.987, 993, 1000)
    line = format_bleu_line(rep)
    assert line.startswith("BLEU = 34.12 (65.2/41.3/28.0/19.5, BP=0.987,")
    assert "ratio=0.993" in line
