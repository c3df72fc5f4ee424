"""Vocabulary, corpus loading, mini-batching, and dictionary induction.

Tokenization is whitespace splitting; any segmentation or casing
normalization happens before the corpus reaches this module. Corpus
files are UTF-8 text, one sentence per line; parallel corpora are two
line-aligned files.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "PAD_ID", "BOS_ID", "EOS_ID", "UNK_ID", "RESERVED",
    "Vocabulary", "Batch", "BilingualDictionary",
    "build_vocab", "make_batches", "induce_dictionary",
    "read_corpus", "load_parallel",
]

PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
RESERVED = ("<pad>", "<s>", "</s>", "<unk>")

BUCKET_WIDTH = 4
DEFAULT_MAX_LEN = 50


class Vocabulary:
    """Token/id mapping with four reserved ids (pad, bos, eos, unk).

    Immutable after construction; unknown tokens map to UNK_ID.
    """

    def __init__(self, tokens: Sequence[str]):
        self._tokens = list(RESERVED) + list(tokens)
        self._index = {tok: i for i, tok in enumerate(self._tokens)}
        if len(self._index) != len(self._tokens):
            raise ValueError("Vocabulary: duplicate token")

    def __len__(self) -> int:
        return len(self._tokens)

    def id(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def to_ids(self, tokens: Iterable[str], append_eos: bool = False) -> list[int]:
        ids = [self.id(t) for t in tokens]
        if append_eos:
            ids.append(EOS_ID)
        return ids

    def to_tokens(self, ids: Iterable[int], strip_markers: bool = True) -> list[str]:
        toks = [self.token(i) for i in ids]
        if strip_markers:
            toks = [t for t in toks if t not in (RESERVED[PAD_ID], RESERVED[BOS_ID], RESERVED[EOS_ID])]
        return toks

    def save(self, path) -> None:
        # One token per line; id = line number - 1 + 4. Reserved ids are implicit.
        with open(path, "w", encoding="utf-8") as f:
            for tok in self._tokens[4:]:
                f.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            tokens = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        return cls(tokens)


def build_vocab(corpus: Iterable[Sequence[str]], cap: int) -> Vocabulary:
    """Keep the ``cap`` most frequent tokens; frequency ties go to the
    token seen first."""
    if cap < 1:
        raise ValueError("build_vocab: cap must be positive")
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    n_tokens = 0
    for sent in corpus:
        for tok in sent:
            counts[tok] = counts.get(tok, 0) + 1
            if tok not in first_seen:
                first_seen[tok] = n_tokens
            n_tokens += 1
    if not counts:
        raise ValueError("build_vocab: empty corpus")
    ranked = sorted(counts, key=lambda t: (-counts[t], first_seen[t]))
    return Vocabulary(ranked[:cap])


@dataclass
class Batch:
    """Padded id matrices plus 0/1 masks for one mini-batch.

    Every row ends with EOS at its last unmasked position; masks are 1 on
    real tokens (EOS included) and never rise again after falling to 0.
    """

    src_ids: np.ndarray
    tgt_ids: np.ndarray
    src_mask: np.ndarray
    tgt_mask: np.ndarray

    @property
    def size(self) -> int:
        return self.src_ids.shape[0]

    def swapped(self) -> "Batch":
        return Batch(self.tgt_ids, self.src_ids, self.tgt_mask, self.src_mask)


def _pad_block(seqs: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(s) for s in seqs)
    ids = np.full((len(seqs), width), PAD_ID, dtype=np.int64)
    mask = np.zeros((len(seqs), width), dtype=np.float64)
    for i, s in enumerate(seqs):
        ids[i, :len(s)] = s
        mask[i, :len(s)] = 1.0
    return ids, mask


def pack_batch(pairs: Sequence[tuple[Sequence[int], Sequence[int]]]) -> Batch:
    """Build one Batch from (src, tgt) id sequences, appending EOS."""
    src = [list(s) + [EOS_ID] for s, _ in pairs]
    tgt = [list(t) + [EOS_ID] for _, t in pairs]
    src_ids, src_mask = _pad_block(src)
    tgt_ids, tgt_mask = _pad_block(tgt)
    return Batch(src_ids, tgt_ids, src_mask, tgt_mask)


def make_batches(pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
                 batch_size: int, shuffle_seed: int) -> list[Batch]:
    """Bucket pairs by source length (width 4), shuffle within buckets and
    across batches by seed, and pad each batch to its own max lengths."""
    if batch_size < 1:
        raise ValueError("make_batches: batch_size must be positive")
    if not pairs:
        return []
    for s, t in pairs:
        if len(s) < 1 or len(t) < 1:
            raise ValueError("make_batches: empty sequence in pair")
    rng = np.random.default_rng(shuffle_seed)
    buckets: dict[int, list[int]] = defaultdict(list)
    for i, (s, _) in enumerate(pairs):
        buckets[len(s) // BUCKET_WIDTH].append(i)
    order: list[int] = []
    for key in sorted(buckets):
        idx = buckets[key]
        perm = rng.permutation(len(idx))
        order.extend(idx[p] for p in perm)
    batches = []
    for start in range(0, len(order), batch_size):
        chunk = [pairs[i] for i in order[start:start + batch_size]]
        batches.append(pack_batch(chunk))
    perm = rng.permutation(len(batches))
    return [batches[p] for p in perm]


class BilingualDictionary:
    """Best-translation map: source token -> (target token, probability)."""

    def __init__(self, entries: dict[str, tuple[str, float]], min_prob: float):
        self.entries = dict(entries)
        self.min_prob = min_prob

    def lookup(self, src_token: str) -> str | None:
        hit = self.entries.get(src_token)
        return hit[0] if hit else None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, src_token: str) -> bool:
        return src_token in self.entries

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for src in sorted(self.entries):
                tgt, prob = self.entries[src]
                f.write(f"{src}\t{tgt}\t{prob:.6f}\n")

    @classmethod
    def load(cls, path) -> "BilingualDictionary":
        entries = {}
        min_prob = 1.0
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                src, tgt, prob = line.split("\t")
                entries[src] = (tgt, float(prob))
                min_prob = min(min_prob, float(prob))
        return cls(entries, min_prob)


def model1_translation_table(parallel, em_iters: int):
    """Lexical translation probabilities p(tgt | src) by expectation
    maximization under a uniform-alignment model, uniform start.

    Returns {src: {tgt: prob}} where each inner map sums to 1.
    """
    if em_iters < 1:
        raise ValueError("model1: em_iters must be >= 1")
    pairs = [(list(s), list(t)) for s, t in parallel]
    if not pairs:
        raise ValueError("model1: empty parallel corpus")
    tgt_vocab = {tok for _, t in pairs for tok in t}
    uniform = 1.0 / len(tgt_vocab)
    table: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(lambda: uniform))
    for _ in range(em_iters):
        counts: dict[str, dict[str, float]] = defaultdict(lambda: defaultdict(float))
        totals: dict[str, float] = defaultdict(float)
        for src, tgt in pairs:
            for t_tok in tgt:
                denom = sum(table[s_tok][t_tok] for s_tok in src)
                for s_tok in src:
                    frac = table[s_tok][t_tok] / denom
                    counts[s_tok][t_tok] += frac
                    totals[s_tok] += frac
        table = defaultdict(lambda: defaultdict(float))
        for s_tok, row in counts.items():
            z = totals[s_tok]
            for t_tok, c in row.items():
                table[s_tok][t_tok] = c / z
    return {s: dict(row) for s, row in table.items()}


def model1_log_likelihood(table, parallel) -> float:
    """Corpus log-likelihood up to the constant alignment prior."""
    import math

    ll = 0.0
    for src, tgt in parallel:
        for t_tok in tgt:
            p = sum(table.get(s_tok, {}).get(t_tok, 0.0) for s_tok in src) / len(src)
            ll += math.log(max(p, 1e-300))
    return ll


def induce_dictionary(parallel, em_iters: int, min_prob: float) -> BilingualDictionary:
    """Model 1 EM over token pairs, then keep each source token's argmax
    target when its probability clears min_prob."""
    if not (0.0 < min_prob < 1.0):
        raise ValueError("induce_dictionary: min_prob must be in (0, 1)")
    table = model1_translation_table(parallel, em_iters)
    entries = {}
    for s_tok, row in table.items():
        t_tok, prob = max(row.items(), key=lambda kv: (kv[1], kv[0]))
        if prob >= min_prob:
            entries[s_tok] = (t_tok, prob)
    return BilingualDictionary(entries, min_prob)


# ---------------------------------------------------------------------------
# corpus files


def read_corpus(path) -> list[list[str]]:
    """One whitespace-tokenized sentence per line."""
    with open(path, encoding="utf-8") as f:
        return [line.split() for line in f.read().splitlines()]


def load_parallel(src_path, tgt_path, max_len: int = DEFAULT_MAX_LEN):
    """Aligned sentence pairs; overlong or empty pairs are dropped."""
    src = read_corpus(src_path)
    tgt = read_corpus(tgt_path)
    if len(src) != len(tgt):
        raise ValueError(
            f"parallel corpus length mismatch: {len(src)} vs {len(tgt)} lines")
    out = []
    for s, t in zip(src, tgt):
        if not s or not t:
            continue
        if len(s) > max_len or len(t) > max_len:
            continue
        out.append((s, t))
    return out
