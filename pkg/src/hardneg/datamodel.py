"""Core data types and file ingestion for the mining pipeline.

Pair files are UTF-8 JSONL, one record per line:

    {"query_id": str, "query": str,
     "positive_passages": [{"docid": str, "title": str, "text": str}, ...]}

Corpus exports are JSONL with {"docid", "title", "text"} per line.
Mined-negative exports are JSONL with
{"query_id", "source", "negatives": [{"docid", "score"}]} per line.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
from dataclasses import dataclass, field

from .errors import DataFormatError

log = logging.getLogger(__name__)

_WS_RUN = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    """Trim and collapse internal whitespace runs to single spaces (case kept)."""
    return _WS_RUN.sub(" ", text.strip())


def text_hash(text: str) -> str:
    """Stable content hash of the normalized text."""
    return hashlib.sha256(normalize_text(text).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Passage:
    doc_id: str
    title: str
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"passage {self.doc_id!r} has empty text")


@dataclass
class QueryPositivePair:
    query_id: str
    query: str
    positive: Passage
    alternates: list[Passage] = field(default_factory=list)

    def __post_init__(self):
        if not self.query.strip():
            raise ValueError(f"pair {self.query_id!r} has empty query")


class PassageCorpus:
    """Deduplicated, ordered passage collection.

    Uniqueness is by normalized text; the first occurrence wins and later
    doc_ids carrying identical text are recorded in ``aliases`` (alias doc_id
    -> canonical doc_id). Read-only after construction.
    """

    def __init__(self, passages: list[Passage], aliases: dict[str, str] | None = None):
        self.passages: list[Passage] = list(passages)
        self.aliases: dict[str, str] = dict(aliases or {})
        self.index_by_id: dict[str, int] = {}
        self.index_by_text_hash: dict[str, str] = {}
        for pos, p in enumerate(self.passages):
            if p.doc_id in self.index_by_id:
                raise ValueError(f"duplicate doc_id {p.doc_id!r} in corpus")
            self.index_by_id[p.doc_id] = pos
            h = text_hash(p.text)
            if h in self.index_by_text_hash:
                raise ValueError(
                    f"duplicate normalized text between {p.doc_id!r} and "
                    f"{self.index_by_text_hash[h]!r}"
                )
            self.index_by_text_hash[h] = p.doc_id

    def __len__(self) -> int:
        return len(self.passages)

    def __iter__(self):
        return iter(self.passages)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.index_by_id

    def get(self, doc_id: str) -> Passage:
        """Resolve a doc_id (canonical or alias) to its passage."""
        if doc_id in self.index_by_id:
            return self.passages[self.index_by_id[doc_id]]
        if doc_id in self.aliases:
            return self.passages[self.index_by_id[self.aliases[doc_id]]]
        raise KeyError(doc_id)

    def doc_ids(self) -> list[str]:
        return [p.doc_id for p in self.passages]


@dataclass
class NegativeEntry:
    passage: Passage
    source: str  # "bm25" | "embed:<model_id>" | "llm:<model_id>"
    score: float | None = None


@dataclass
class HardNegativeSet:
    """Ordered negatives for one query: score-descending for mined sources,
    generation order for llm sources."""

    query_id: str
    negatives: list[NegativeEntry] = field(default_factory=list)

    @property
    def source(self) -> str:
        return self.negatives[0].source if self.negatives else ""

    def texts(self) -> list[str]:
        return [e.passage.text for e in self.negatives]


def _parse_pair_line(obj: dict, line_no: int, path: str) -> QueryPositivePair:
    try:
        query_id = obj["query_id"]
        query = obj["query"]
        raw_positives = obj["positive_passages"]
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"missing field {exc}", path=path, line=line_no) from exc
    if not isinstance(raw_positives, list) or not raw_positives:
        raise DataFormatError(f"no positive passage at line {line_no}", path=path, line=line_no)
    if not str(query).strip():
        raise DataFormatError("empty query", path=path, line=line_no)
    positives = []
    for rp in raw_positives:
        try:
            p = Passage(doc_id=str(rp["docid"]), title=str(rp.get("title", "")), text=str(rp["text"]))
        except KeyError as exc:
            raise DataFormatError(f"positive passage missing field {exc}", path=path, line=line_no) from exc
        except ValueError as exc:
            raise DataFormatError(str(exc), path=path, line=line_no) from exc
        positives.append(p)
    return QueryPositivePair(
        query_id=str(query_id), query=str(query), positive=positives[0], alternates=positives[1:]
    )


def ingest_pairs(path: str) -> list[QueryPositivePair]:
    """Load query/positive pairs from a JSONL file, in file order.

    When a record lists multiple positive passages the first is the pair's
    positive and the rest are kept as alternates. Repeated query_ids are kept
    (with a warning): each line stays one pair.
    """
    pairs: list[QueryPositivePair] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"invalid JSON: {exc.msg}", path=path, line=line_no) from exc
            pair = _parse_pair_line(obj, line_no, path)
            if pair.query_id in seen_ids:
                log.warning("duplicate query_id %r at %s:%d (kept)", pair.query_id, path, line_no)
            seen_ids.add(pair.query_id)
            pairs.append(pair)
    return pairs


def write_pairs(pairs: list[QueryPositivePair], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            record = {
                "query_id": pair.query_id,
                "query": pair.query,
                "positive_passages": [
                    {"docid": p.doc_id, "title": p.title, "text": p.text}
                    for p in [pair.positive, *pair.alternates]
                ],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def build_corpus(
    pairs: list[QueryPositivePair], extra: list[Passage] | None = None
) -> PassageCorpus:
    """Collect every distinct passage text exactly once, first occurrence wins.

    Later doc_ids whose normalized text collides with an earlier passage are
    recorded as aliases, not errors.
    """
    passages: list[Passage] = []
    aliases: dict[str, str] = {}
    by_hash: dict[str, str] = {}
    by_id: set[str] = set()

    def add(p: Passage) -> None:
        h = text_hash(p.text)
        if h in by_hash:
            if p.doc_id not in by_id and p.doc_id != by_hash[h]:
                aliases[p.doc_id] = by_hash[h]
            return
        if p.doc_id in by_id:
            # same id, different text: keep the first, do not silently remap
            raise ValueError(f"doc_id {p.doc_id!r} reused with different text")
        by_hash[h] = p.doc_id
        by_id.add(p.doc_id)
        passages.append(p)

    for pair in pairs:
        add(pair.positive)
        for alt in pair.alternates:
            add(alt)
    for p in extra or []:
        add(p)
    return PassageCorpus(passages, aliases)


def sample_corpus(corpus: PassageCorpus, n: int, seed: int) -> PassageCorpus:
    """Uniform sample of n passages without replacement.

    Deterministic: passages are sorted by doc_id, then shuffled by an explicit
    Fisher-Yates walk driven by ``random.Random(seed)`` (Mersenne Twister),
    and the first n are taken. Identical (corpus, n, seed) yields identical
    output ordering on any platform.
    """
    if n > len(corpus):
        raise ValueError(f"cannot sample {n} from corpus of {len(corpus)}")
    ordered = sorted(corpus.passages, key=lambda p: p.doc_id)
    rng = random.Random(seed)
    for i in range(len(ordered) - 1, 0, -1):
        j = rng.randrange(i + 1)
        ordered[i], ordered[j] = ordered[j], ordered[i]
    return PassageCorpus(ordered[:n])


def write_corpus(corpus: PassageCorpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in corpus:
            fh.write(json.dumps({"docid": p.doc_id, "title": p.title, "text": p.text}, ensure_ascii=False) + "\n")


def read_corpus(path: str) -> PassageCorpus:
    passages = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                passages.append(Passage(doc_id=str(obj["docid"]), title=str(obj.get("title", "")), text=str(obj["text"])))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DataFormatError(f"bad corpus record: {exc}", path=path, line=line_no) from exc
    return PassageCorpus(passages)


def write_mined_negatives(sets: list[HardNegativeSet], path: str) -> None:
    """Export corpus-mined negative sets as {"query_id", "source", "negatives"} lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in sets:
            record = {
                "query_id": s.query_id,
                "source": s.source,
                "negatives": [{"docid": e.passage.doc_id, "score": e.score} for e in s.negatives],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_negative_sets(path: str, corpus: PassageCorpus | None = None) -> dict[str, HardNegativeSet]:
    """Load negative sets keyed by query_id.

    Handles both export shapes: mined sets reference passages by docid (a
    corpus is required to resolve them), llm sets carry the text inline.
    """
    sets: dict[str, HardNegativeSet] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"invalid JSON: {exc.msg}", path=path, line=line_no) from exc
            source = obj.get("source", "")
            entries = []
            for i, neg in enumerate(obj.get("negatives", [])):
                if "docid" in neg:
                    if corpus is None:
                        raise DataFormatError(
                            "docid negatives need a corpus to resolve", path=path, line=line_no
                        )
                    try:
                        passage = corpus.get(neg["docid"])
                    except KeyError as exc:
                        raise DataFormatError(f"unknown docid {neg['docid']!r}", path=path, line=line_no) from exc
                    entries.append(NegativeEntry(passage=passage, source=source, score=neg.get("score")))
                else:
                    passage = Passage(doc_id=f"{obj['query_id']}#{source}#{i + 1}", title="", text=neg["text"])
                    entries.append(NegativeEntry(passage=passage, source=source, score=None))
            sets[obj["query_id"]] = HardNegativeSet(query_id=obj["query_id"], negatives=entries)
    return sets
