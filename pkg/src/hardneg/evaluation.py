"""nDCG@k evaluation, retrieval-run generation and result aggregation.

Gains are linear (trec_eval convention): DCG@k = sum of rel_i / log2(i + 1)
over the top k, normalized by the ideal DCG from the grade-sorted ranking.
Exponential gain (2^rel - 1) is available via gain="exp" but is not the
default.

Qrels files are TREC format ("query_id 0 doc_id grade"), run files are TREC
format ("query_id Q0 doc_id rank score tag"). The packaged data file
data/published_ndcg10.json carries published nDCG@10 results for the 22
reference fine-tuning configurations across 10 BEIR datasets, for use by the
aggregation reproduction tests and the report command.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import resources

from .bm25 import Bm25Index, score_all
from .datamodel import PassageCorpus
from .errors import DataFormatError
from .mixer import LLM_LABELS
from .tokenizer import tokenize

log = logging.getLogger(__name__)


class Qrels:
    """Relevance judgments: (query_id, doc_id) -> integer grade >= 0."""

    def __init__(self, grades: dict[tuple[str, str], int]):
        self.by_query: dict[str, dict[str, int]] = {}
        for (qid, did), grade in grades.items():
            if grade < 0:
                raise ValueError(f"negative grade for ({qid}, {did})")
            self.by_query.setdefault(qid, {})[did] = grade

    def grade(self, query_id: str, doc_id: str) -> int:
        return self.by_query.get(query_id, {}).get(doc_id, 0)

    def query_ids(self) -> list[str]:
        return list(self.by_query)


@dataclass
class RunRanking:
    """Per query, a ranked (doc_id, score) list, scores non-increasing."""

    rankings: dict[str, list[tuple[str, float]]]

    def __post_init__(self):
        for qid, ranked in self.rankings.items():
            ids = [d for d, _ in ranked]
            if len(ids) != len(set(ids)):
                raise ValueError(f"duplicate doc_id in run for query {qid!r}")
            scores = [s for _, s in ranked]
            if any(a < b for a, b in zip(scores, scores[1:])):
                raise ValueError(f"scores not non-increasing for query {qid!r}")


@dataclass
class MetricResult:
    per_query: dict[str, float]
    mean: float
    k: int
    skipped: list[str] = field(default_factory=list)


def _gain(rel: int, gain: str) -> float:
    return float(rel) if gain == "linear" else float(2**rel - 1)


def ndcg_at_k(run: RunRanking, qrels: Qrels, k: int = 10, gain: str = "linear") -> MetricResult:
    """nDCG@k per query and the arithmetic mean over evaluated queries.

    Queries judged but absent from the run score 0; judged queries without
    any positive grade are skipped (and reported in the result).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if gain not in ("linear", "exp"):
        raise ValueError(f"unknown gain {gain!r}")
    per_query: dict[str, float] = {}
    skipped: list[str] = []
    for qid, judged in qrels.by_query.items():
        ideal = sorted(judged.values(), reverse=True)
        idcg = math.fsum(
            _gain(rel, gain) / math.log2(i + 2) for i, rel in enumerate(ideal[:k])
        )
        if idcg <= 0:
            skipped.append(qid)
            log.warning("query %r has no positive grade, skipped", qid)
            continue
        ranked = run.rankings.get(qid, [])
        dcg = math.fsum(
            _gain(judged.get(doc_id, 0), gain) / math.log2(i + 2)
            for i, (doc_id, _) in enumerate(ranked[:k])
        )
        per_query[qid] = dcg / idcg
    mean = math.fsum(per_query.values()) / len(per_query) if per_query else 0.0
    return MetricResult(per_query=per_query, mean=mean, k=k, skipped=skipped)


def make_run(retriever, queries: list[tuple[str, str]], corpus: PassageCorpus, depth: int = 100) -> RunRanking:
    """Rank the corpus for each (query_id, query text) with the given retriever.

    retriever is either a Bm25Index or an (EmbeddingProvider, corpus_vectors)
    pair as produced by embed_corpus. Ties break by ascending doc_id.
    """
    import numpy as np

    if len(corpus) == 0:
        raise ValueError("empty corpus")
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    rankings: dict[str, list[tuple[str, float]]] = {}
    if isinstance(retriever, Bm25Index):
        for qid, text in queries:
            scores = score_all(retriever, tokenize(text))
            ranked = sorted(
                zip(retriever.doc_ids, scores), key=lambda item: (-item[1], item[0])
            )
            rankings[qid] = ranked[:depth]
    else:
        provider, vectors = retriever
        matrix = np.stack([v.as_array() for v in vectors])
        doc_ids = corpus.doc_ids()
        for qid, text in queries:
            qv = provider.embed([text])[0].normalized().as_array()
            sims = matrix @ qv
            ranked = sorted(
                zip(doc_ids, (float(s) for s in sims)), key=lambda item: (-item[1], item[0])
            )
            rankings[qid] = ranked[:depth]
    return RunRanking(rankings)


def read_qrels(path: str) -> Qrels:
    grades: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DataFormatError("expected 'query_id 0 doc_id grade'", path=path, line=line_no)
            try:
                grades[(parts[0], parts[2])] = int(parts[3])
            except ValueError as exc:
                raise DataFormatError(f"bad grade {parts[3]!r}", path=path, line=line_no) from exc
    return Qrels(grades)


def write_qrels(qrels: Qrels, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid, judged in qrels.by_query.items():
            for did, grade in judged.items():
                fh.write(f"{qid} 0 {did} {grade}\n")


def read_run(path: str, tag: str = "run") -> RunRanking:
    rankings: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise DataFormatError(
                    "expected 'query_id Q0 doc_id rank score tag'", path=path, line=line_no
                )
            rankings.setdefault(parts[0], []).append((parts[2], float(parts[4])))
    return RunRanking(rankings)


def write_run(run: RunRanking, path: str, tag: str = "run") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid, ranked in run.rankings.items():
            for rank, (did, score) in enumerate(ranked, start=1):
                fh.write(f"{qid} Q0 {did} {rank} {score:.6f} {tag}\n")


@dataclass
class AggregateReport:
    configs: list[str]
    datasets: list[str]
    averages: dict[str, float]
    table: str


def aggregate_table(cells: dict[tuple[str, str], float]) -> AggregateReport:
    """Arithmetic mean across datasets per configuration, plus a text table.

    Every configuration must cover the identical dataset set; a ragged matrix
    raises an error listing the missing cells. Display rounds to 3 decimals
    (round-half-even) and marks the best value per column with '*'.
    """
    configs: list[str] = []
    datasets: list[str] = []
    for config, dataset in cells:
        if config not in configs:
            configs.append(config)
        if dataset not in datasets:
            datasets.append(dataset)
    missing = [
        (config, dataset)
        for config in configs
        for dataset in datasets
        if (config, dataset) not in cells
    ]
    if missing:
        raise ValueError(f"ragged cell matrix, missing: {missing}")
    averages = {
        config: math.fsum(cells[(config, dataset)] for dataset in datasets) / len(datasets)
        for config in configs
    }

    best_per_column = {
        dataset: max(cells[(config, dataset)] for config in configs) for dataset in datasets
    }
    best_avg = max(averages.values())
    name_width = max(len(c) for c in configs + ["configuration"])
    col_width = max(8, *(len(d) + 1 for d in datasets))

    def fmt(value: float, best: float) -> str:
        mark = "*" if value == best else " "
        return f"{value:.3f}{mark}".rjust(col_width)

    lines = [
        "configuration".ljust(name_width)
        + "".join(d.rjust(col_width) for d in datasets)
        + "Avg".rjust(col_width)
    ]
    for config in configs:
        row = config.ljust(name_width)
        row += "".join(fmt(cells[(config, d)], best_per_column[d]) for d in datasets)
        row += fmt(averages[config], best_avg)
        lines.append(row)
    return AggregateReport(
        configs=configs, datasets=datasets, averages=averages, table="\n".join(lines)
    )


@dataclass
class FamilyComparison:
    family: str
    aggregated_config: str
    aggregated: float
    individual_mean: float
    difference: float
    individuals: dict[str, float]


_FAMILIES = (
    ("standalone", "all-llms", ""),
    ("bm25", "all-llms+bm25", "bm25+"),
    ("ce", "all-llms+ce", "ce+"),
    ("bm25+ce", "all-llms+bm25+ce", "bm25+ce+"),
)


def compare_aggregated_vs_individual(
    averages: dict[str, float], llm_labels: tuple[str, ...] = LLM_LABELS
) -> list[FamilyComparison]:
    """Aggregated-dataset score versus the mean over per-LLM datasets.

    The standalone family (all-llms vs the 4 individual LLM configs) is
    required; each +bm25 / +ce / +bm25+ce family is reported whenever its
    aggregated config is present, and then all four of its individual configs
    must be present too.
    """
    if "all-llms" not in averages:
        raise KeyError("missing config 'all-llms'")
    results = []
    for family, aggregated_config, prefix in _FAMILIES:
        if aggregated_config not in averages:
            continue
        individual_names = [f"{prefix}{label}" for label in llm_labels]
        missing = [n for n in individual_names if n not in averages]
        if missing:
            raise KeyError(f"family {family!r}: missing configs {missing}")
        individuals = {n: averages[n] for n in individual_names}
        mean = math.fsum(individuals.values()) / len(individuals)
        results.append(
            FamilyComparison(
                family=family,
                aggregated_config=aggregated_config,
                aggregated=averages[aggregated_config],
                individual_mean=mean,
                difference=averages[aggregated_config] - mean,
                individuals=individuals,
            )
        )
    return results


def load_reference_cells(path: str | None = None):
    """Published nDCG@10 cells: (flat cells dict, published averages, report order).

    Reads the packaged data file unless an explicit path is given.
    """
    if path is None:
        text = resources.files("hardneg").joinpath("data/published_ndcg10.json").read_text("utf-8")
        payload = json.loads(text)
    else:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    datasets = payload["datasets"]
    cells: dict[tuple[str, str], float] = {}
    published_avg: dict[str, float] = {}
    for entry in payload["configs"]:
        for dataset in datasets:
            cells[(entry["name"], dataset)] = float(entry["cells"][dataset])
        published_avg[entry["name"]] = float(entry["avg"])
    return cells, published_avg, [e["name"] for e in payload["configs"]]
