import logging
import math
import random

import numpy as np
import pytest

from hardneg.datamodel import Passage, PassageCorpus, QueryPositivePair
from hardneg.embedding import (
    EmbeddingVector,
    HashedEmbeddingProvider,
    RemoteEmbeddingProvider,
    cosine,
    embed_corpus,
    hashed_bow_vector,
    mine_embed,
)
from hardneg.errors import TransportError

from oracles import corpus_from_docs, naive_embed_sort, naive_exclusion, random_corpus_docs, random_pair


def vec(*values):
    return EmbeddingVector(tuple(float(v) for v in values))


class TestCosine:
    def test_self_similarity(self):
        u = vec(0.3, -1.2, 4.5)
        assert abs(cosine(u, u) - 1.0) <= 1e-9

    def test_orthogonal(self):
        assert cosine(vec(1, 0), vec(0, 1)) == 0.0

    def test_forty_five_degrees(self):
        assert cosine(vec(1, 1), vec(1, 0)) == pytest.approx(1 / math.sqrt(2), abs=1e-9)
        assert round(cosine(vec(1, 1), vec(1, 0)), 5) == 0.70711

    def test_symmetry(self):
        u, v = vec(1, 2, 3), vec(-2, 0.5, 1)
        assert cosine(u, v) == cosine(v, u)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            cosine(vec(0, 0), vec(1, 0))

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            cosine(vec(1, 0), vec(1, 0, 0))

    def test_range(self):
        rng = random.Random(1)
        for _ in range(100):
            u = vec(*(rng.uniform(-5, 5) for _ in range(8)))
            v = vec(*(rng.uniform(-5, 5) for _ in range(8)))
            assert -1 - 1e-12 <= cosine(u, v) <= 1 + 1e-12


class TestHashedProvider:
    def test_determinism_across_calls(self):
        provider = HashedEmbeddingProvider()
        a = provider.embed(["the same text"])[0]
        b = provider.embed(["the same text"])[0]
        assert a.values == b.values  # byte-identical

    def test_unit_norm_after_normalize(self):
        provider = HashedEmbeddingProvider()
        v = provider.embed(["hello world of retrieval"])[0].normalized()
        assert abs(v.norm - 1.0) <= 1e-6

    def test_identical_text_means_cosine_one(self):
        provider = HashedEmbeddingProvider()
        a, b = provider.embed(["Some Passage", "Some Passage"])
        assert cosine(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_tokenless_text_still_embeds(self):
        provider = HashedEmbeddingProvider()
        v = provider.embed(["!!!"])[0]
        assert v.norm > 0

    def test_declared_dimension(self):
        provider = HashedEmbeddingProvider(dimension=64)
        assert provider.embed(["abc"])[0].dimension == 64

    def test_batch_order_matches_input(self):
        provider = HashedEmbeddingProvider()
        texts = ["alpha", "beta", "gamma"]
        batch = provider.embed(texts)
        singles = [provider.embed([t])[0] for t in texts]
        assert [v.values for v in batch] == [v.values for v in singles]


class TestEmbedCorpus:
    def test_batch_size_does_not_change_results(self):
        rng = random.Random(21)
        corpus = corpus_from_docs(random_corpus_docs(rng, 40))
        provider = HashedEmbeddingProvider()
        one = embed_corpus(provider, corpus, batch_size=1)
        big = embed_corpus(provider, corpus, batch_size=64)
        assert len(one) == len(big) == 40
        for a, b in zip(one, big):
            assert np.allclose(a.as_array(), b.as_array(), atol=1e-6)

    def test_empty_corpus(self):
        assert embed_corpus(HashedEmbeddingProvider(), PassageCorpus([])) == []

    def test_concurrent_batches_preserve_order(self):
        rng = random.Random(22)
        corpus = corpus_from_docs(random_corpus_docs(rng, 30))
        provider = HashedEmbeddingProvider()
        seq = embed_corpus(provider, corpus, batch_size=4, max_in_flight=1)
        par = embed_corpus(provider, corpus, batch_size=4, max_in_flight=4)
        assert [v.values for v in seq] == [v.values for v in par]

    def test_vectors_unit_normalized(self):
        corpus = corpus_from_docs([("d0", "one two"), ("d1", "three four five")])
        for v in embed_corpus(HashedEmbeddingProvider(), corpus):
            assert abs(v.norm - 1.0) <= 1e-6


class TestMineEmbed:
    def _setup(self, seed, n_docs=50):
        rng = random.Random(seed)
        docs = random_corpus_docs(rng, n_docs)
        corpus = corpus_from_docs(docs)
        provider = HashedEmbeddingProvider()
        vectors = embed_corpus(provider, corpus, batch_size=16)
        return rng, docs, corpus, provider, vectors

    def test_query_text_clone_ranks_first(self):
        docs = [("d0", "completely unrelated content"), ("d1", "words matching the query exactly"), ("d2", "the positive answer text")]
        corpus = corpus_from_docs(docs)
        provider = HashedEmbeddingProvider()
        vectors = embed_corpus(provider, corpus, batch_size=8)
        pair = QueryPositivePair("q", "words matching the query exactly", Passage("d2", "", docs[2][1]))
        mined = mine_embed(provider, corpus, vectors, pair, k=2)
        assert mined.negatives[0].passage.doc_id == "d1"
        assert mined.negatives[0].score == pytest.approx(1.0, abs=1e-9)

    def test_k_equals_size_minus_one_is_full_sort(self):
        rng, docs, corpus, provider, vectors = self._setup(31, n_docs=20)
        pair = random_pair(rng, docs)
        mined = mine_embed(provider, corpus, vectors, pair, k=19)
        assert len(mined.negatives) == 19
        scores = [e.score for e in mined.negatives]
        assert scores == sorted(scores, reverse=True)
        assert pair.positive.doc_id not in [e.passage.doc_id for e in mined.negatives]

    def test_matches_brute_force_oracle(self):
        rng, docs, corpus, provider, vectors = self._setup(32, n_docs=200)
        for _ in range(5):
            pair = random_pair(rng, docs)
            mined = mine_embed(provider, corpus, vectors, pair, k=5)
            exclude = naive_exclusion(docs, pair.positive.doc_id, pair.positive.text)
            expected = naive_embed_sort(provider, docs, pair.query, exclude)[:5]
            assert [e.passage.doc_id for e in mined.negatives] == [d for d, _ in expected]
            for e, (_, s) in zip(mined.negatives, expected):
                assert e.score == pytest.approx(s, abs=1e-12)

    def test_scale_invariance_of_ranking(self):
        rng, docs, corpus, provider, vectors = self._setup(33)
        pair = random_pair(rng, docs)
        baseline = mine_embed(provider, corpus, vectors, pair, k=10)
        scaled = [EmbeddingVector(tuple(3.7 * x for x in v.values)) for v in vectors]
        rescaled = mine_embed(provider, corpus, scaled, pair, k=10)
        assert [e.passage.doc_id for e in baseline.negatives] == [
            e.passage.doc_id for e in rescaled.negatives
        ]

    def test_source_tag_carries_model_id(self):
        rng, docs, corpus, provider, vectors = self._setup(34, n_docs=10)
        pair = random_pair(rng, docs)
        mined = mine_embed(provider, corpus, vectors, pair, k=3)
        assert mined.source == "embed:hashed-bow"

    def test_misaligned_vectors_rejected(self):
        rng, docs, corpus, provider, vectors = self._setup(35, n_docs=10)
        pair = random_pair(rng, docs)
        with pytest.raises(ValueError):
            mine_embed(provider, corpus, vectors[:-1], pair, k=2)

    def test_small_corpus_warning(self, caplog):
        docs = [("d0", "aa bb"), ("d1", "cc dd")]
        corpus = corpus_from_docs(docs)
        provider = HashedEmbeddingProvider()
        vectors = embed_corpus(provider, corpus)
        pair = QueryPositivePair("q", "aa", Passage("d0", "", "aa bb"))
        with caplog.at_level(logging.WARNING):
            mined = mine_embed(provider, corpus, vectors, pair, k=5)
        assert len(mined.negatives) == 1
        assert "only 1 candidates" in caplog.text


class TestRemoteProvider:
    def test_remote_matches_offline(self, mock_server):
        remote = RemoteEmbeddingProvider(mock_server.url, "hashed-bow", dimension=256)
        offline = HashedEmbeddingProvider(dimension=256)
        texts = ["first text", "second text", "third"]
        got = remote.embed(texts)
        want = offline.embed(texts)
        for g, w in zip(got, want):
            assert np.allclose(g.as_array(), w.as_array(), atol=1e-9)

    def test_transient_failures_are_retried(self):
        from hardneg.mockserver import MockProviderServer

        with MockProviderServer(embed_failures=2) as server:
            provider = RemoteEmbeddingProvider(
                server.url, "hashed-bow", dimension=256, max_retries=3, backoff=0.01
            )
            vectors = provider.embed(["some text"])
            assert len(vectors) == 1
            assert len(server.embed_requests) == 3

    def test_exhausted_retries_raise_transport_error(self):
        from hardneg.mockserver import MockProviderServer

        with MockProviderServer(embed_failures=10) as server:
            provider = RemoteEmbeddingProvider(
                server.url, "hashed-bow", dimension=256, max_retries=1, backoff=0.01
            )
            with pytest.raises(TransportError):
                provider.embed(["some text"])

    def test_unreachable_endpoint(self):
        provider = RemoteEmbeddingProvider(
            "http://127.0.0.1:9", "m", dimension=8, max_retries=0, backoff=0.01, timeout=0.5
        )
        with pytest.raises(TransportError):
            provider.embed(["text"])

    def test_dimension_mismatch_detected(self, mock_server):
        provider = RemoteEmbeddingProvider(mock_server.url, "hashed-bow", dimension=128)
        with pytest.raises(TransportError, match="dim"):
            provider.embed(["text"])

    def test_failed_batch_identified_in_embed_corpus(self):
        from hardneg.mockserver import MockProviderServer

        with MockProviderServer(embed_failures=99) as server:
            provider = RemoteEmbeddingProvider(
                server.url, "hashed-bow", dimension=256, max_retries=0, backoff=0.01
            )
            corpus = corpus_from_docs([("d0", "aa"), ("d1", "bb")])
            with pytest.raises(TransportError):
                embed_corpus(provider, corpus, batch_size=1)


def test_hashed_bow_is_stable_reference():
    # frozen coordinates pin the hashing scheme across processes and platforms
    v = hashed_bow_vector("bm25 ranks docs", dimension=16)
    expected = {3: 0.5773502691896258, 5: -0.5773502691896258, 8: 0.5773502691896258}
    assert {i: x for i, x in enumerate(v) if x != 0.0} == expected
    assert abs(math.fsum(x * x for x in v) - 1.0) < 1e-12
    assert hashed_bow_vector("bm25 ranks docs", dimension=16) == v
