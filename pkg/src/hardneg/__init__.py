"""Hard-negative mining and dataset synthesis toolkit for dense retrievers.

Mines negatives from a passage corpus with BM25 or embedding cosine
similarity, generates corpus-free negatives through a chat-completions
endpoint, composes training-dataset recipes, exports MNRL-ready triplet
files, and computes/aggregates nDCG@10 evaluation reports.
"""

from .bm25 import Bm25Index, Bm25Params, build_index, mine_bm25, score
from .datamodel import (
    HardNegativeSet,
    Passage,
    PassageCorpus,
    QueryPositivePair,
    build_corpus,
    ingest_pairs,
    sample_corpus,
)
from .embedding import (
    EmbeddingVector,
    HashedEmbeddingProvider,
    RemoteEmbeddingProvider,
    cosine,
    embed_corpus,
    mine_embed,
)
from .evaluation import (
    MetricResult,
    Qrels,
    RunRanking,
    aggregate_table,
    compare_aggregated_vs_individual,
    make_run,
    ndcg_at_k,
)
from .llm import (
    ChatCompletionsClient,
    ChatPrompt,
    GenerationConfig,
    GenerationRecord,
    generate_hard_negatives,
    parse_passages,
    render_prompt,
    validate_passages,
)
from .mixer import Recipe, TrainingExample, compose, export_examples, reference_recipe_book

__version__ = "0.1.0"

__all__ = [
    "Bm25Index",
    "Bm25Params",
    "ChatCompletionsClient",
    "ChatPrompt",
    "EmbeddingVector",
    "GenerationConfig",
    "GenerationRecord",
    "HardNegativeSet",
    "HashedEmbeddingProvider",
    "MetricResult",
    "Passage",
    "PassageCorpus",
    "Qrels",
    "QueryPositivePair",
    "Recipe",
    "RemoteEmbeddingProvider",
    "RunRanking",
    "TrainingExample",
    "aggregate_table",
    "build_corpus",
    "build_index",
    "compare_aggregated_vs_individual",
    "compose",
    "cosine",
    "embed_corpus",
    "export_examples",
    "generate_hard_negatives",
    "ingest_pairs",
    "make_run",
    "mine_bm25",
    "mine_embed",
    "ndcg_at_k",
    "parse_passages",
    "reference_recipe_book",
    "render_prompt",
    "sample_corpus",
    "score",
    "validate_passages",
]
