"""
Mining hard negatives and composing a training dataset
=======================================================

Builds a small passage corpus, mines hard negatives for each query with both
BM25 and embedding cosine similarity, composes a two-source recipe, and
exports MNRL-ready triplets with a manifest.
"""

import json
import tempfile
from pathlib import Path

from hardneg import (
    HashedEmbeddingProvider,
    Passage,
    QueryPositivePair,
    build_corpus,
    build_index,
    compose,
    embed_corpus,
    export_examples,
    mine_bm25,
    mine_embed,
)
from hardneg.mixer import Recipe, selector_for_source

# --- a toy dataset: three queries with their ground-truth passages ----------
pairs = [
    QueryPositivePair(
        "q1",
        "what does bm25 score",
        Passage("d1", "", "BM25 scores documents by term frequency, inverse document frequency and length."),
    ),
    QueryPositivePair(
        "q2",
        "how are dense retrievers trained",
        Passage("d2", "", "Dense retrievers are trained contrastively on query passage pairs with negatives."),
    ),
    QueryPositivePair(
        "q3",
        "what is a hard negative",
        Passage("d3", "", "A hard negative looks relevant to the query yet does not answer it."),
    ),
]

# distractor passages make the mining non-trivial
extra = [
    Passage("x1", "", "Term frequency counts how often a word appears in a document."),
    Passage("x2", "", "Inverse document frequency weighs rare terms above common ones."),
    Passage("x3", "", "Contrastive training pulls positives close and pushes negatives away."),
    Passage("x4", "", "Negatives sampled at random are usually too easy to be informative."),
    Passage("x5", "", "Passage length normalization keeps long documents from dominating."),
]

# the corpus deduplicates by normalized text; first occurrence wins
corpus = build_corpus(pairs, extra)
print(f"corpus: {len(corpus)} passages")

# --- BM25 mining -------------------------------------------------------------
index = build_index(corpus)
bm25_sets = {p.query_id: mine_bm25(index, corpus, p, k=3) for p in pairs}
for p in pairs:
    top = bm25_sets[p.query_id].negatives[0]
    print(f"bm25   {p.query_id}: top negative {top.passage.doc_id} (score {top.score:.3f})")

# --- embedding mining --------------------------------------------------------
# the offline provider is deterministic: hashed bag-of-words, unit-normalized
provider = HashedEmbeddingProvider()
vectors = embed_corpus(provider, corpus, batch_size=16)
embed_sets = {p.query_id: mine_embed(provider, corpus, vectors, p, k=3) for p in pairs}
for p in pairs:
    top = embed_sets[p.query_id].negatives[0]
    print(f"embed  {p.query_id}: top negative {top.passage.doc_id} (cosine {top.score:.3f})")

# --- compose a recipe and export ----------------------------------------------
# selectors: "bm25", "ce" (any embedding-mined set), "llm:<label>"
sources = {
    "bm25": bm25_sets,
    selector_for_source(f"embed:{provider.model_id}"): embed_sets,
}
recipe = Recipe("bm25+ce", ("bm25", "ce"), mode="rows")
examples = compose(recipe, pairs, sources)
print(f"recipe {recipe.name!r} in rows mode: {len(examples)} examples "
      f"({len(recipe.sources)} sources x {len(pairs)} pairs)")

out = Path(tempfile.mkdtemp()) / "bm25+ce.jsonl"
manifest = export_examples(examples, str(out), recipe.name)
print(f"exported {manifest.examples} examples, {manifest.negatives} negatives -> {out}")
print("manifest:", json.dumps(manifest.to_dict(), indent=2))
