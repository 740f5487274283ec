"""Okapi BM25 inverted index and top-k hard-negative retrieval.

Scoring follows the classic form

    score(q, d) = sum over t in q of
        idf(t) * f(t,d) * (k1 + 1) / (f(t,d) + k1 * (1 - b + b * |d| / avgdl))

with idf(t) = ln((N - n_t + 0.5) / (n_t + 0.5) + 1). A negative raw idf would
be replaced by epsilon * mean(positive idf values); the smoothed (+1) form
keeps every raw value positive for n_t <= N, so the floor exists for contract
parity with the classic Okapi handling and stays inert in practice. Defaults
k1=1.5, b=0.75, epsilon=0.25.

Determinism notes: avgdl and the idf floor use math.fsum so statistics do not
depend on document insertion order, and per-document scores accumulate in
query-token order so an independent per-document evaluator reproduces them
bit for bit.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

from .datamodel import HardNegativeSet, NegativeEntry, PassageCorpus, QueryPositivePair, text_hash
from .tokenizer import tokenize

log = logging.getLogger(__name__)

SOURCE_BM25 = "bm25"


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75
    epsilon: float = 0.25

    def __post_init__(self):
        if not (math.isfinite(self.k1) and self.k1 >= 0):
            raise ValueError(f"k1 must be finite and >= 0, got {self.k1}")
        if not (math.isfinite(self.b) and 0 <= self.b <= 1):
            raise ValueError(f"b must be in [0, 1], got {self.b}")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")


class Bm25Index:
    """Immutable term statistics over a tokenized corpus."""

    def __init__(self, corpus: PassageCorpus, params: Bm25Params):
        self.params = params
        self.doc_ids: list[str] = corpus.doc_ids()
        self._pos: dict[str, int] = {d: i for i, d in enumerate(self.doc_ids)}
        tokenized = [tokenize(p.text) for p in corpus]
        self.N: int = len(tokenized)
        self.doc_len: list[int] = [len(toks) for toks in tokenized]
        self.avgdl: float = math.fsum(self.doc_len) / self.N
        self.tf: list[dict[str, int]] = [dict(Counter(toks)) for toks in tokenized]
        self.df: dict[str, int] = Counter()
        for counts in self.tf:
            for term in counts:
                self.df[term] += 1
        self.df = dict(self.df)
        self.idf: dict[str, float] = compute_idf(self.N, self.df, params.epsilon)
        # postings: term -> list of (doc position, in-doc frequency)
        self._postings: dict[str, list[tuple[int, int]]] = {}
        for pos, counts in enumerate(self.tf):
            for term, freq in counts.items():
                self._postings.setdefault(term, []).append((pos, freq))


def compute_idf(n_docs: int, df: dict[str, int], epsilon: float) -> dict[str, float]:
    """Smoothed idf; a negative raw value would be floored at epsilon * mean positive idf."""
    raw = {t: math.log((n_docs - n + 0.5) / (n + 0.5) + 1.0) for t, n in df.items()}
    positive = [v for v in raw.values() if v > 0]
    floor = epsilon * (math.fsum(positive) / len(positive)) if positive else 0.0
    return {t: (v if v > 0 else floor) for t, v in raw.items()}


def build_index(corpus: PassageCorpus, params: Bm25Params | None = None) -> Bm25Index:
    if len(corpus) == 0:
        raise ValueError("cannot index an empty corpus")
    return Bm25Index(corpus, params or Bm25Params())


def _length_norm(index: Bm25Index, pos: int) -> float:
    p = index.params
    return p.k1 * (1.0 - p.b + p.b * index.doc_len[pos] / index.avgdl)


def score(index: Bm25Index, query_tokens: list[str], doc_id: str) -> float:
    """Score one document; query terms absent from it contribute 0."""
    if doc_id not in index._pos:
        raise KeyError(f"unknown doc_id {doc_id!r}")
    pos = index._pos[doc_id]
    counts = index.tf[pos]
    k1 = index.params.k1
    norm = _length_norm(index, pos)
    total = 0.0
    for t in query_tokens:
        f = counts.get(t, 0)
        if f == 0:
            continue
        total += index.idf[t] * (f * (k1 + 1.0)) / (f + norm)
    return total


def score_all(index: Bm25Index, query_tokens: list[str]) -> list[float]:
    """Scores for every document via the postings lists.

    Contributions accumulate in query-token order, matching a per-document
    evaluation of the same formula exactly.
    """
    scores = [0.0] * index.N
    k1 = index.params.k1
    for t in query_tokens:
        postings = index._postings.get(t)
        if postings is None:
            continue
        idf_t = index.idf[t]
        for pos, f in postings:
            scores[pos] += idf_t * (f * (k1 + 1.0)) / (f + _length_norm(index, pos))
    return scores


def mine_bm25(
    index: Bm25Index, corpus: PassageCorpus, pair: QueryPositivePair, k: int = 5
) -> HardNegativeSet:
    """Top-k highest scoring documents for the pair's query, positive excluded.

    Exclusion is both by doc_id and by normalized text; order is descending
    score with ties broken by ascending doc_id.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    query_tokens = tokenize(pair.query)
    scores = score_all(index, query_tokens)
    # the corpus is deduplicated, so at most one document shares the
    # positive's normalized text
    excluded = {pair.positive.doc_id, corpus.index_by_text_hash.get(text_hash(pair.positive.text))}
    candidates = [
        (doc_id, scores[pos])
        for pos, doc_id in enumerate(index.doc_ids)
        if doc_id not in excluded
    ]
    candidates.sort(key=lambda item: (-item[1], item[0]))
    if len(candidates) < k:
        log.warning(
            "query %r: only %d candidates for k=%d", pair.query_id, len(candidates), k
        )
    top = candidates[:k]
    return HardNegativeSet(
        query_id=pair.query_id,
        negatives=[
            NegativeEntry(passage=corpus.get(doc_id), source=SOURCE_BM25, score=s)
            for doc_id, s in top
        ],
    )
