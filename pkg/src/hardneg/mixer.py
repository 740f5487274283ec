"""Dataset recipes: compose mined/generated negative sets into training triplets.

Triplet files are JSONL, one {"query", "pos", "negs", "tags"} object per line,
accompanied by a manifest recording the recipe name, counts, a per-source
histogram and the sha256 of the triplet file. Identical inputs always produce
byte-identical files.

Recipe sources are selectors: "bm25", "ce" (any embedding-mined set) or
"llm:<label>". A recipe composes either in "rows" mode (one example per
pair and source, datasets appended side by side) or "merged" mode (one
example per pair, negatives concatenated across sources with exact-text
dedup).
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass

from .datamodel import HardNegativeSet, QueryPositivePair, normalize_text
from .errors import DataFormatError

log = logging.getLogger(__name__)

LLM_LABELS = ("phi4-14b", "llama3-8b", "qwen3-4b", "qwen3-30b")


@dataclass
class TrainingExample:
    query: str
    positive: str
    negatives: list[str]
    source_tags: list[str]

    def __post_init__(self):
        if not self.negatives:
            raise ValueError("training example needs at least one negative")
        if len(self.negatives) != len(self.source_tags):
            raise ValueError("source_tags must align with negatives")
        norm_pos = normalize_text(self.positive)
        for neg in self.negatives:
            if normalize_text(neg) == norm_pos:
                raise ValueError("negative equals the positive")


@dataclass(frozen=True)
class Recipe:
    name: str
    sources: tuple[str, ...]
    mode: str = "rows"  # "rows" | "merged"

    def __post_init__(self):
        if not self.sources:
            raise ValueError(f"recipe {self.name!r} has no sources")
        if self.mode not in ("rows", "merged"):
            raise ValueError(f"recipe {self.name!r}: unknown mode {self.mode!r}")


def selector_for_source(source: str) -> str:
    """Map an on-disk source tag to a recipe selector ("embed:*" counts as "ce")."""
    if source.startswith("embed:"):
        return "ce"
    return source


def compose(
    recipe: Recipe,
    pairs: list[QueryPositivePair],
    negative_sets_by_source: dict[str, dict[str, HardNegativeSet]],
) -> list[TrainingExample]:
    """Materialize the recipe over the pairs.

    negative_sets_by_source maps selector -> (query_id -> HardNegativeSet).
    Pairs missing any of the recipe's sources are skipped entirely (warning),
    keeping per-recipe pair populations comparable. Negatives whose normalized
    text equals the pair's positive are dropped. Output order is pair order,
    then recipe source order.
    """
    for selector in recipe.sources:
        if selector not in negative_sets_by_source:
            raise KeyError(f"recipe {recipe.name!r}: unknown source selector {selector!r}")
    examples: list[TrainingExample] = []
    for pair in pairs:
        per_source = []
        missing = False
        for selector in recipe.sources:
            negset = negative_sets_by_source[selector].get(pair.query_id)
            if negset is None or not negset.negatives:
                log.warning(
                    "recipe %r: pair %r has no %r negatives, skipped",
                    recipe.name,
                    pair.query_id,
                    selector,
                )
                missing = True
                break
            per_source.append(negset)
        if missing:
            continue
        norm_pos = normalize_text(pair.positive.text)
        if recipe.mode == "rows":
            for negset in per_source:
                negs, tags = [], []
                for entry in negset.negatives:
                    if normalize_text(entry.passage.text) == norm_pos:
                        log.warning("pair %r: dropped a negative equal to the positive", pair.query_id)
                        continue
                    negs.append(entry.passage.text)
                    tags.append(entry.source)
                if negs:
                    examples.append(
                        TrainingExample(pair.query, pair.positive.text, negs, tags)
                    )
                else:
                    log.warning("recipe %r: pair %r left no usable negatives", recipe.name, pair.query_id)
        else:
            negs, tags = [], []
            seen: set[str] = set()
            for negset in per_source:
                for entry in negset.negatives:
                    norm = normalize_text(entry.passage.text)
                    if norm == norm_pos or norm in seen:
                        continue
                    seen.add(norm)
                    negs.append(entry.passage.text)
                    tags.append(entry.source)
            if negs:
                examples.append(TrainingExample(pair.query, pair.positive.text, negs, tags))
            else:
                log.warning("recipe %r: pair %r left no usable negatives", recipe.name, pair.query_id)
    return examples


def reference_recipe_book(
    llm_labels: tuple[str, ...] = LLM_LABELS, mode: str = "rows"
) -> list[Recipe]:
    """The 22 standard fine-tuning recipes.

    Two mined baselines, four aggregated all-LLM combinations, and per-LLM
    combinations with bm25+ce, bm25, ce, and standalone.
    """
    if len(llm_labels) != 4:
        raise ValueError(f"expected 4 llm labels, got {len(llm_labels)}")
    llm_sources = tuple(f"llm:{label}" for label in llm_labels)
    book = [
        Recipe("bm25", ("bm25",), mode),
        Recipe("ce", ("ce",), mode),
        Recipe("all-llms", llm_sources, mode),
        Recipe("all-llms+bm25", llm_sources + ("bm25",), mode),
        Recipe("all-llms+ce", llm_sources + ("ce",), mode),
        Recipe("all-llms+bm25+ce", llm_sources + ("bm25", "ce"), mode),
    ]
    for label in llm_labels:
        book.append(Recipe(f"bm25+ce+{label}", ("bm25", "ce", f"llm:{label}"), mode))
    for label in llm_labels:
        book.append(Recipe(f"bm25+{label}", ("bm25", f"llm:{label}"), mode))
    for label in llm_labels:
        book.append(Recipe(f"ce+{label}", ("ce", f"llm:{label}"), mode))
    for label in llm_labels:
        book.append(Recipe(label, (f"llm:{label}",), mode))
    names = [r.name for r in book]
    assert len(names) == len(set(names)) == 22
    return book


@dataclass
class ExportManifest:
    recipe: str
    examples: int
    negatives: int
    sources: dict[str, int]
    sha256: str

    def to_dict(self) -> dict:
        return {
            "recipe": self.recipe,
            "examples": self.examples,
            "negatives": self.negatives,
            "sources": self.sources,
            "sha256": self.sha256,
        }


def export_examples(
    examples: list[TrainingExample], path: str, recipe_name: str, fmt: str = "jsonl"
) -> ExportManifest:
    """Write the triplet file plus its manifest (at path + ".manifest.json")."""
    if fmt != "jsonl":
        raise ValueError(f"unknown export format {fmt!r}")
    if not examples:
        raise ValueError("nothing to export")
    payload = "".join(
        json.dumps(
            {"query": ex.query, "pos": ex.positive, "negs": ex.negatives, "tags": ex.source_tags},
            ensure_ascii=False,
        )
        + "\n"
        for ex in examples
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(payload)
    histogram: dict[str, int] = {}
    for ex in examples:
        for tag in ex.source_tags:
            histogram[tag] = histogram.get(tag, 0) + 1
    manifest = ExportManifest(
        recipe=recipe_name,
        examples=len(examples),
        negatives=sum(len(ex.negatives) for ex in examples),
        sources=dict(sorted(histogram.items())),
        sha256=hashlib.sha256(payload).hexdigest(),
    )
    with open(f"{path}.manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_examples(path: str) -> list[TrainingExample]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                examples.append(
                    TrainingExample(
                        query=obj["query"],
                        positive=obj["pos"],
                        negatives=list(obj["negs"]),
                        source_tags=list(obj["tags"]),
                    )
                )
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DataFormatError(f"bad triplet record: {exc}", path=path, line=line_no) from exc
    return examples
