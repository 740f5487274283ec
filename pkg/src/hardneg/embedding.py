"""Embedding providers and cosine-similarity hard-negative mining.

Two providers implement the same interface: a deterministic offline hashed
bag-of-words provider (for tests and air-gapped runs) and a remote provider
speaking HTTP POST /embed with

    {"model": str, "input": [str, ...]}
    -> {"data": [{"index": int, "embedding": [float, ...]}, ...], "dim": int}

The offline provider hashes each token to one of d coordinates with a +/-1
sign drawn from the same hash, accumulates integer counts, and unit-normalizes
at the end, so identical text always yields the byte-identical vector on any
platform.
"""

from __future__ import annotations

import hashlib
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
import requests

from .datamodel import HardNegativeSet, NegativeEntry, PassageCorpus, QueryPositivePair, text_hash
from .errors import TransportError
from .tokenizer import tokenize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.values)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(np.asarray(self.values)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def normalized(self) -> "EmbeddingVector":
        arr = self.as_array()
        n = np.linalg.norm(arr)
        if n == 0:
            raise ValueError("cannot normalize a zero vector")
        return EmbeddingVector(tuple((arr / n).tolist()))


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """dot(u, v) / (|u| |v|), in [-1, 1]. Errors on zero vectors or shape mismatch."""
    if u.dimension != v.dimension:
        raise ValueError(f"dimension mismatch: {u.dimension} vs {v.dimension}")
    ua, va = u.as_array(), v.as_array()
    nu, nv = np.linalg.norm(ua), np.linalg.norm(va)
    if nu == 0 or nv == 0:
        raise ValueError("cosine undefined for zero vectors")
    return float(np.dot(ua, va) / (nu * nv))


class EmbeddingProvider(Protocol):
    model_id: str
    dimension: int

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def _token_hash(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")


def hashed_bow_vector(text: str, dimension: int = 256) -> list[float]:
    """Signed hashed bag-of-words embedding: integer accumulation, then unit norm.

    Token-free text falls back to a fixed basis vector so every passage still
    gets a valid unit vector.
    """
    counts = [0] * dimension
    for tok in tokenize(text):
        h = _token_hash(tok)
        sign = 1 if (h >> 60) & 1 == 0 else -1
        counts[h % dimension] += sign
    if not any(counts):
        counts[0] = 1
    arr = np.asarray(counts, dtype=np.float64)
    return (arr / np.linalg.norm(arr)).tolist()


class HashedEmbeddingProvider:
    """Offline deterministic provider; identical text => identical vector."""

    def __init__(self, dimension: int = 256, model_id: str = "hashed-bow"):
        self.model_id = model_id
        self.dimension = dimension

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        return [EmbeddingVector(tuple(hashed_bow_vector(t, self.dimension))) for t in texts]


class RemoteEmbeddingProvider:
    """HTTP /embed client with timeout and exponential-backoff retries."""

    def __init__(
        self,
        endpoint: str,
        model_id: str,
        dimension: int = 256,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.5,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model_id = model_id
        self.dimension = dimension
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        url = f"{self.endpoint}/embed"
        payload = {"model": self.model_id, "input": list(texts)}
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = requests.post(url, json=payload, timeout=self.timeout)
                resp.raise_for_status()
                body = resp.json()
                break
            except (requests.RequestException, ValueError) as exc:
                last_exc = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * (2**attempt))
        else:
            raise TransportError(
                f"embedding request failed after {self.max_retries + 1} attempts: {last_exc}",
                endpoint=url,
            )
        if body.get("dim") != self.dimension:
            raise TransportError(
                f"provider returned dim={body.get('dim')}, expected {self.dimension}", endpoint=url
            )
        data = sorted(body["data"], key=lambda item: item["index"])
        if len(data) != len(texts):
            raise TransportError(
                f"provider returned {len(data)} vectors for {len(texts)} inputs", endpoint=url
            )
        return [EmbeddingVector(tuple(float(x) for x in item["embedding"])) for item in data]


def embed_corpus(
    provider: EmbeddingProvider,
    corpus: PassageCorpus,
    batch_size: int = 64,
    max_in_flight: int = 1,
) -> list[EmbeddingVector]:
    """Unit-normalized vector per passage, aligned with corpus order.

    Batching (and concurrent batch submission) never changes results; output
    is reassembled in corpus order.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    texts = [p.text for p in corpus]
    batches = [texts[i : i + batch_size] for i in range(0, len(texts), batch_size)]

    def run(batch_idx: int) -> list[EmbeddingVector]:
        try:
            return provider.embed(batches[batch_idx])
        except TransportError:
            raise
        except Exception as exc:
            raise TransportError(f"batch {batch_idx} failed: {exc}") from exc

    if max_in_flight > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            results = list(pool.map(run, range(len(batches))))
    else:
        results = [run(i) for i in range(len(batches))]

    vectors = [vec.normalized() for batch in results for vec in batch]
    for vec in vectors:
        if vec.dimension != provider.dimension:
            raise ValueError(
                f"provider returned dimension {vec.dimension}, declared {provider.dimension}"
            )
    return vectors


def mine_embed(
    provider: EmbeddingProvider,
    corpus: PassageCorpus,
    corpus_vectors: list[EmbeddingVector],
    pair: QueryPositivePair,
    k: int = 5,
) -> HardNegativeSet:
    """Top-k passages by cosine(query, passage), positive excluded.

    corpus_vectors must be aligned with corpus order (see embed_corpus).
    Descending similarity, ties broken by ascending doc_id.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(corpus_vectors) != len(corpus):
        raise ValueError("corpus_vectors not aligned with corpus")
    query_vec = provider.embed([pair.query])[0].normalized().as_array()
    excluded = {pair.positive.doc_id, corpus.index_by_text_hash.get(text_hash(pair.positive.text))}
    source = f"embed:{provider.model_id}"
    candidates = []
    for pos, passage in enumerate(corpus.passages):
        if passage.doc_id in excluded:
            continue
        sim = float(np.dot(query_vec, corpus_vectors[pos].as_array()))
        candidates.append((passage.doc_id, sim))
    candidates.sort(key=lambda item: (-item[1], item[0]))
    if len(candidates) < k:
        log.warning(
            "query %r: only %d candidates for k=%d", pair.query_id, len(candidates), k
        )
    return HardNegativeSet(
        query_id=pair.query_id,
        negatives=[
            NegativeEntry(passage=corpus.get(doc_id), source=source, score=sim)
            for doc_id, sim in candidates[:k]
        ],
    )
