import json
import logging
import random

import pytest

from hardneg.datamodel import HardNegativeSet, NegativeEntry, Passage, QueryPositivePair
from hardneg.mixer import (
    LLM_LABELS,
    Recipe,
    TrainingExample,
    compose,
    export_examples,
    read_examples,
    reference_recipe_book,
    selector_for_source,
)


def make_pairs(n):
    return [
        QueryPositivePair(f"q{i}", f"query number {i}", Passage(f"p{i}", "", f"positive text {i}"))
        for i in range(n)
    ]


def neg_set(query_id, source, texts):
    return HardNegativeSet(
        query_id=query_id,
        negatives=[
            NegativeEntry(Passage(f"{query_id}#{source}#{j}", "", t), source, None)
            for j, t in enumerate(texts)
        ],
    )


def sources_for(pairs, spec):
    """spec: {selector: texts-per-pair callable}"""
    out = {}
    for selector, texts_fn in spec.items():
        source = "embed:test-model" if selector == "ce" else selector
        out[selector] = {
            p.query_id: neg_set(p.query_id, source, texts_fn(p)) for p in pairs
        }
    return out


class TestCompose:
    def test_single_source_rows(self):
        pairs = make_pairs(10)
        sources = sources_for(pairs, {"bm25": lambda p: [f"neg {p.query_id} {j}" for j in range(5)]})
        examples = compose(Recipe("bm25", ("bm25",), "rows"), pairs, sources)
        assert len(examples) == 10
        assert all(tag == "bm25" for ex in examples for tag in ex.source_tags)

    def test_three_sources_make_three_n_rows(self):
        pairs = make_pairs(7)
        sources = sources_for(
            pairs,
            {
                "bm25": lambda p: [f"b {p.query_id} {j}" for j in range(5)],
                "ce": lambda p: [f"c {p.query_id} {j}" for j in range(5)],
                "llm:phi4-14b": lambda p: [f"l {p.query_id} {j}" for j in range(5)],
            },
        )
        recipe = Recipe("bm25+ce+phi4-14b", ("bm25", "ce", "llm:phi4-14b"), "rows")
        examples = compose(recipe, pairs, sources)
        assert len(examples) == 3 * 7
        # pair order then source order
        assert examples[0].negatives[0].startswith("b q0")
        assert examples[1].negatives[0].startswith("c q0")
        assert examples[2].negatives[0].startswith("l q0")
        assert examples[3].negatives[0].startswith("b q1")

    def test_merged_mode_dedups_shared_negative(self):
        pairs = make_pairs(1)
        shared = "identical negative text"
        sources = sources_for(
            pairs,
            {
                "bm25": lambda p: [shared, "bm25 only 1", "bm25 only 2"],
                "ce": lambda p: [shared, "ce only 1", "ce only 2"],
            },
        )
        examples = compose(Recipe("both", ("bm25", "ce"), "merged"), pairs, sources)
        assert len(examples) == 1
        assert len(examples[0].negatives) == 3 + 3 - 1
        assert examples[0].negatives.count(shared) == 1
        # tags align: the shared one keeps the first source's tag
        assert examples[0].source_tags[0] == "bm25"

    def test_unknown_selector_errors(self):
        pairs = make_pairs(2)
        sources = sources_for(pairs, {"bm25": lambda p: ["x"]})
        with pytest.raises(KeyError, match="unknown source selector"):
            compose(Recipe("r", ("bm25", "nope"), "rows"), pairs, sources)

    def test_pair_missing_a_source_is_skipped_entirely(self, caplog):
        pairs = make_pairs(3)
        sources = sources_for(
            pairs,
            {
                "bm25": lambda p: [f"b {p.query_id}"],
                "ce": lambda p: [f"c {p.query_id}"],
            },
        )
        del sources["ce"]["q1"]
        with caplog.at_level(logging.WARNING):
            examples = compose(Recipe("r", ("bm25", "ce"), "rows"), pairs, sources)
        # q1 contributes nothing at all, not even its bm25 row
        assert len(examples) == 4
        assert not any("q1" in ex.query for ex in [e for e in examples if "1 " in e.query])
        assert "skipped" in caplog.text

    def test_positive_leak_dropped(self, caplog):
        pairs = make_pairs(1)
        sources = sources_for(
            pairs, {"llm:phi4-14b": lambda p: ["ok one", p.positive.text, "ok two"]}
        )
        with caplog.at_level(logging.WARNING):
            examples = compose(Recipe("phi4-14b", ("llm:phi4-14b",), "rows"), pairs, sources)
        assert len(examples) == 1
        assert examples[0].negatives == ["ok one", "ok two"]

    def test_rows_content_commutes_across_source_order(self):
        pairs = make_pairs(5)
        sources = sources_for(
            pairs,
            {
                "bm25": lambda p: [f"b {p.query_id} {j}" for j in range(3)],
                "ce": lambda p: [f"c {p.query_id} {j}" for j in range(3)],
            },
        )
        ab = compose(Recipe("ab", ("bm25", "ce"), "rows"), pairs, sources)
        ba = compose(Recipe("ba", ("ce", "bm25"), "rows"), pairs, sources)

        def multiset(examples):
            return sorted(
                json.dumps([ex.query, ex.positive, ex.negatives, ex.source_tags]) for ex in examples
            )

        assert multiset(ab) == multiset(ba)
        assert [ex.negatives for ex in ab] != [ex.negatives for ex in ba]  # order differs


class TestRecipeBook:
    def test_emits_22_unique_recipes(self):
        book = reference_recipe_book()
        assert len(book) == 22
        assert len({r.name for r in book}) == 22

    def test_all_llms_recipe_uses_only_llm_sources(self):
        book = {r.name: r for r in reference_recipe_book()}
        sources = book["all-llms"].sources
        assert sorted(sources) == sorted(f"llm:{label}" for label in LLM_LABELS)
        assert not any(s in ("bm25", "ce") for s in sources)

    def test_baselines_are_single_source(self):
        book = {r.name: r for r in reference_recipe_book()}
        assert book["bm25"].sources == ("bm25",)
        assert book["ce"].sources == ("ce",)

    def test_mixed_llm_and_mined_recipe_count(self):
        # enumerated from the book itself: 4 (bm25+ce+llm) + 4 (bm25+llm)
        # + 4 (ce+llm) + 3 aggregated (all-llms+bm25, +ce, +bm25+ce) = 15
        book = reference_recipe_book()
        mixed = [
            r
            for r in book
            if any(s.startswith("llm:") for s in r.sources)
            and any(s in ("bm25", "ce") for s in r.sources)
        ]
        assert len(mixed) == 15

    def test_block_structure(self):
        names = [r.name for r in reference_recipe_book()]
        assert names[:6] == ["bm25", "ce", "all-llms", "all-llms+bm25", "all-llms+ce", "all-llms+bm25+ce"]
        assert sum(n.startswith("bm25+ce+") for n in names) == 4
        assert sum(n.startswith("bm25+") and not n.startswith("bm25+ce+") for n in names) == 4
        assert sum(n.startswith("ce+") for n in names) == 4
        assert sum(n in LLM_LABELS for n in names) == 4

    def test_custom_labels(self):
        book = reference_recipe_book(("a", "b", "c", "d"))
        assert any(r.name == "bm25+ce+a" for r in book)
        with pytest.raises(ValueError):
            reference_recipe_book(("only", "three", "labels"))


class TestExport:
    def make_examples(self, n=3, negs=5):
        return [
            TrainingExample(
                query=f"query {i}",
                positive=f"positive {i}",
                negatives=[f"neg {i} {j}" for j in range(negs)],
                source_tags=["bm25"] * negs,
            )
            for i in range(n)
        ]

    def test_counts_and_lines(self, tmp_path):
        path = tmp_path / "t.jsonl"
        manifest = export_examples(self.make_examples(3, 5), str(path), "bm25")
        assert manifest.examples == 3
        assert manifest.negatives == 15
        assert manifest.sources == {"bm25": 15}
        assert len(path.read_text().splitlines()) == 3
        assert json.loads((tmp_path / "t.jsonl.manifest.json").read_text())["sha256"] == manifest.sha256

    def test_reexport_is_byte_identical(self, tmp_path):
        examples = self.make_examples()
        m1 = export_examples(examples, str(tmp_path / "a.jsonl"), "bm25")
        m2 = export_examples(examples, str(tmp_path / "b.jsonl"), "bm25")
        assert m1.sha256 == m2.sha256
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    def test_round_trip(self, tmp_path):
        examples = self.make_examples()
        path = tmp_path / "t.jsonl"
        export_examples(examples, str(path), "bm25")
        loaded = read_examples(str(path))
        assert loaded == examples

    def test_empty_export_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            export_examples([], str(tmp_path / "t.jsonl"), "bm25")

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            export_examples(self.make_examples(), str(tmp_path / "t"), "bm25", fmt="csv")


class TestTrainingExampleInvariants:
    def test_rejects_empty_negatives(self):
        with pytest.raises(ValueError):
            TrainingExample("q", "p", [], [])

    def test_rejects_positive_leak(self):
        with pytest.raises(ValueError):
            TrainingExample("q", "same  text", ["same text"], ["bm25"])

    def test_rejects_misaligned_tags(self):
        with pytest.raises(ValueError):
            TrainingExample("q", "p", ["n1", "n2"], ["bm25"])


class TestRandomizedProperties:
    def test_rows_cardinality_and_no_leakage(self):
        rng = random.Random(99)
        for _ in range(20):
            n_pairs = rng.randint(1, 12)
            pairs = make_pairs(n_pairs)
            selectors = rng.sample(["bm25", "ce", "llm:phi4-14b", "llm:qwen3-4b"], rng.randint(1, 4))
            sources = sources_for(
                pairs,
                {
                    sel: (lambda p, s=sel: [f"{s} neg {p.query_id} {j}" for j in range(rng.randint(1, 6))])
                    for sel in selectors
                },
            )
            recipe = Recipe("r", tuple(selectors), rng.choice(["rows", "merged"]))
            examples = compose(recipe, pairs, sources)
            if recipe.mode == "rows":
                assert len(examples) == len(selectors) * n_pairs
            else:
                assert len(examples) == n_pairs
            for ex in examples:
                assert ex.positive not in ex.negatives
                if recipe.mode == "merged":
                    assert len(set(ex.negatives)) == len(ex.negatives)


def test_selector_for_source():
    assert selector_for_source("bm25") == "bm25"
    assert selector_for_source("embed:msmarco-minilm") == "ce"
    assert selector_for_source("llm:phi4-14b") == "llm:phi4-14b"
