"""Operator CLI: ingest, mine, generate, mix, eval, report.

One JSON config file drives every command; command-line flags win over file
values. All randomness flows from the single top-level seed: stage-specific
seeds derive as sha256("<seed>:<purpose>") unless the stage pins its own.
Commands validate the whole config before any side effect and write
byte-identical outputs given identical inputs.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 transport error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import bm25 as bm25_mod
from . import datamodel, embedding, evaluation, llm, mixer
from .errors import ConfigError, DataFormatError, GenerationError, PipelineError, TransportError

log = logging.getLogger("hardneg")


def derive_seed(master: int, purpose: str) -> int:
    """Stage seed derived from the master seed and a purpose label."""
    digest = hashlib.sha256(f"{master}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class PathsConfig:
    pairs: str = ""
    corpus: str | None = None  # optional extra passages to union into the corpus
    out_dir: str = "out"


@dataclass
class SampleConfig:
    n: int | None = None
    seed: int | None = None


@dataclass
class Bm25Config:
    k1: float = 1.5
    b: float = 0.75
    epsilon: float = 0.25
    k: int = 5


@dataclass
class EmbedConfig:
    endpoint: str = "offline"  # "offline" or a base URL implementing POST /embed
    model_id: str = "hashed-bow"
    dimension: int = 256
    batch_size: int = 64
    k: int = 5
    timeout: float = 30.0
    max_retries: int = 3


@dataclass
class LlmConfig:
    endpoint: str = ""
    model_id: list[str] = field(default_factory=lambda: ["phi4-14b"])
    temperature: float = 0.6
    top_p: float = 0.95
    top_k: int = 20
    min_p: float = 0.0
    max_tokens: int = 1024
    max_retries: int = 3
    request_timeout: float = 30.0
    parallelism: int = 1
    strict: bool = False
    send_min_p: bool = True


@dataclass
class RecipesConfig:
    names: list[str] | str = "all"  # "all" expands to the 22 reference recipes
    llm_labels: list[str] = field(default_factory=lambda: list(mixer.LLM_LABELS))
    mode: str = "rows"


@dataclass
class EvalConfig:
    qrels: str = ""
    depth: int = 100
    k: int = 10
    retriever: str = "bm25"  # "bm25" | "embed"


@dataclass
class PipelineConfig:
    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    sample: SampleConfig = field(default_factory=SampleConfig)
    bm25: Bm25Config = field(default_factory=Bm25Config)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    recipes: RecipesConfig = field(default_factory=RecipesConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


def _merge_section(instance, data: dict, section: str):
    fields = {f.name for f in dataclasses.fields(instance)}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"unknown config key {section}.{key}")
        setattr(instance, key, value)
    return instance


def load_config(path: str) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    config = PipelineConfig()
    for key, value in data.items():
        if key == "seed":
            config.seed = int(value)
        elif key in ("paths", "sample", "bm25", "embed", "llm", "recipes", "eval"):
            _merge_section(getattr(config, key), value, key)
        else:
            raise ConfigError(f"unknown config key {key}")
    if isinstance(config.llm.model_id, str):
        config.llm.model_id = [config.llm.model_id]
    return config


def _out(config: PipelineConfig) -> Path:
    return Path(config.paths.out_dir)


def _require_file(path: str | None, what: str) -> str:
    if not path:
        raise ConfigError(f"{what} not configured")
    if not Path(path).is_file():
        raise ConfigError(f"{what} does not exist: {path}")
    return path


def _load_stage_inputs(config: PipelineConfig):
    pairs_path = _out(config) / "pairs.jsonl"
    corpus_path = _out(config) / "corpus.jsonl"
    for path in (pairs_path, corpus_path):
        if not path.is_file():
            raise ConfigError(f"missing upstream artifact {path} (run 'ingest' first)")
    return datamodel.ingest_pairs(str(pairs_path)), datamodel.read_corpus(str(corpus_path))


def cmd_ingest(config: PipelineConfig, args) -> int:
    _require_file(config.paths.pairs, "paths.pairs")
    if config.paths.corpus:
        _require_file(config.paths.corpus, "paths.corpus")
    if config.sample.n is not None and config.sample.seed is None and config.seed is None:
        raise ConfigError("sampling requested but no seed configured")
    pairs = datamodel.ingest_pairs(config.paths.pairs)
    extra = list(datamodel.read_corpus(config.paths.corpus)) if config.paths.corpus else None
    corpus = datamodel.build_corpus(pairs, extra)
    if config.sample.n is not None:
        seed = config.sample.seed if config.sample.seed is not None else derive_seed(config.seed, "sample")
        corpus = datamodel.sample_corpus(corpus, config.sample.n, seed)
    if args.dry_run:
        print(
            f"plan: ingest {len(pairs)} pairs -> corpus of {len(corpus)} passages "
            f"(+{len(corpus.aliases)} aliases) into {_out(config)}"
        )
        return 0
    out = _out(config)
    out.mkdir(parents=True, exist_ok=True)
    datamodel.write_pairs(pairs, str(out / "pairs.jsonl"))
    datamodel.write_corpus(corpus, str(out / "corpus.jsonl"))
    # ground-truth qrels derived from the pairs (grade 1 per positive)
    qrels = evaluation.Qrels({(p.query_id, p.positive.doc_id): 1 for p in pairs})
    evaluation.write_qrels(qrels, str(out / "qrels.trec"))
    log.info("ingested %d pairs, corpus %d passages", len(pairs), len(corpus))
    return 0


def _embed_provider(config: PipelineConfig):
    if config.embed.endpoint == "offline":
        return embedding.HashedEmbeddingProvider(
            dimension=config.embed.dimension, model_id=config.embed.model_id
        )
    return embedding.RemoteEmbeddingProvider(
        endpoint=config.embed.endpoint,
        model_id=config.embed.model_id,
        dimension=config.embed.dimension,
        timeout=config.embed.timeout,
        max_retries=config.embed.max_retries,
    )


def cmd_mine(config: PipelineConfig, args) -> int:
    pairs, corpus = _load_stage_inputs(config)
    if args.source == "bm25":
        k = args.k or config.bm25.k
        if args.dry_run:
            print(f"plan: mine bm25 top-{k} for {len(pairs)} pairs over {len(corpus)} passages")
            return 0
        params = bm25_mod.Bm25Params(config.bm25.k1, config.bm25.b, config.bm25.epsilon)
        index = bm25_mod.build_index(corpus, params)
        sets = []
        for pair in pairs:
            t0 = time.perf_counter()
            sets.append(bm25_mod.mine_bm25(index, corpus, pair, k))
            log.info("mined bm25 %s in %.1fms", pair.query_id, (time.perf_counter() - t0) * 1e3)
        path = _out(config) / "negatives.bm25.jsonl"
        datamodel.write_mined_negatives(sets, str(path))
    elif args.source == "embed":
        k = args.k or config.embed.k
        if args.dry_run:
            print(
                f"plan: mine embed top-{k} for {len(pairs)} pairs over {len(corpus)} passages "
                f"(endpoint {config.embed.endpoint})"
            )
            return 0
        provider = _embed_provider(config)
        vectors = embedding.embed_corpus(provider, corpus, config.embed.batch_size)
        sets = []
        for pair in pairs:
            t0 = time.perf_counter()
            sets.append(embedding.mine_embed(provider, corpus, vectors, pair, k))
            log.info("mined embed %s in %.1fms", pair.query_id, (time.perf_counter() - t0) * 1e3)
        path = _out(config) / "negatives.ce.jsonl"
        datamodel.write_mined_negatives(sets, str(path))
    else:
        raise ConfigError(f"unknown mine source {args.source!r}")
    log.info("wrote %s", path)
    return 0


def cmd_generate(config: PipelineConfig, args) -> int:
    if not config.llm.endpoint:
        raise ConfigError("llm.endpoint not configured")
    pairs, _ = _load_stage_inputs(config)
    models = [args.model] if args.model else config.llm.model_id
    if args.dry_run:
        print(
            f"plan: generate 5 negatives x {len(pairs)} pairs x models {models} "
            f"at {config.llm.endpoint} (parallelism {config.llm.parallelism})"
        )
        return 0
    client = llm.ChatCompletionsClient(config.llm.endpoint, send_min_p=config.llm.send_min_p)
    out = _out(config)
    for model in models:
        gen_config = llm.GenerationConfig(
            model_id=model,
            temperature=config.llm.temperature,
            top_p=config.llm.top_p,
            top_k=config.llm.top_k,
            min_p=config.llm.min_p,
            max_tokens=config.llm.max_tokens,
            max_retries=config.llm.max_retries,
            request_timeout=config.llm.request_timeout,
        )

        def one(pair):
            t0 = time.perf_counter()
            result = llm.generate_hard_negatives(client, pair, gen_config, strict=config.llm.strict)
            log.info(
                "generated %s/%s in %.1fms (attempts %d)",
                model,
                pair.query_id,
                (time.perf_counter() - t0) * 1e3,
                result[1].attempts,
            )
            return result

        if config.llm.parallelism > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=config.llm.parallelism) as pool:
                results = list(pool.map(one, pairs))  # map keeps input-pair order
        else:
            results = [one(pair) for pair in pairs]
        llm.write_llm_negatives(results, str(out / f"negatives.llm.{model}.jsonl"))
        llm.write_generation_records([r for _, r in results], str(out / f"records.llm.{model}.jsonl"))
        log.info("wrote negatives.llm.%s.jsonl", model)
    return 0


def _expand_recipes(config: PipelineConfig, override: str | None) -> list[mixer.Recipe]:
    labels = tuple(config.recipes.llm_labels)
    book = {r.name: r for r in mixer.reference_recipe_book(labels, config.recipes.mode)}
    names = config.recipes.names
    if override:
        names = "all" if override == "all" else [override]
    if names == "all":
        return list(book.values())
    unknown = [n for n in names if n not in book]
    if unknown:
        raise ConfigError(f"unknown recipe names {unknown}; known: {sorted(book)}")
    return [book[n] for n in names]


def _load_negative_sources(config: PipelineConfig, corpus) -> dict[str, dict[str, datamodel.HardNegativeSet]]:
    out = _out(config)
    sources: dict[str, dict[str, datamodel.HardNegativeSet]] = {}
    bm25_path = out / "negatives.bm25.jsonl"
    if bm25_path.is_file():
        sources["bm25"] = datamodel.read_negative_sets(str(bm25_path), corpus)
    ce_path = out / "negatives.ce.jsonl"
    if ce_path.is_file():
        sources["ce"] = datamodel.read_negative_sets(str(ce_path), corpus)
    for path in sorted(out.glob("negatives.llm.*.jsonl")):
        label = path.name[len("negatives.llm.") : -len(".jsonl")]
        sources[f"llm:{label}"] = datamodel.read_negative_sets(str(path))
    return sources


def cmd_mix(config: PipelineConfig, args) -> int:
    pairs, corpus = _load_stage_inputs(config)
    recipes = _expand_recipes(config, args.recipe)
    sources = _load_negative_sources(config, corpus)
    needed = {s for r in recipes for s in r.sources}
    missing = sorted(needed - set(sources))
    if missing:
        raise ConfigError(f"negatives not mined/generated yet for sources: {missing}")
    if args.dry_run:
        print(f"plan: compose {len(recipes)} recipes over {len(pairs)} pairs:")
        for r in recipes:
            print(f"  {r.name}: sources {list(r.sources)}, mode {r.mode}")
        return 0
    triplet_dir = _out(config) / "triplets"
    triplet_dir.mkdir(parents=True, exist_ok=True)
    for recipe in recipes:
        examples = mixer.compose(recipe, pairs, sources)
        path = triplet_dir / f"{recipe.name}.jsonl"
        manifest = mixer.export_examples(examples, str(path), recipe.name)
        log.info("recipe %s: %d examples, sha256 %s", recipe.name, manifest.examples, manifest.sha256[:12])
    return 0


def cmd_eval(config: PipelineConfig, args) -> int:
    qrels_path = args.qrels or config.eval.qrels or str(_out(config) / "qrels.trec")
    _require_file(qrels_path, "eval.qrels")
    pairs, corpus = _load_stage_inputs(config)
    depth = args.depth or config.eval.depth
    k = args.k or config.eval.k
    if args.dry_run:
        print(
            f"plan: evaluate {config.eval.retriever} run depth {depth} on {len(pairs)} queries, "
            f"ndcg@{k} against {qrels_path}"
        )
        return 0
    queries = [(p.query_id, p.query) for p in pairs]
    if config.eval.retriever == "bm25":
        params = bm25_mod.Bm25Params(config.bm25.k1, config.bm25.b, config.bm25.epsilon)
        retriever = bm25_mod.build_index(corpus, params)
    elif config.eval.retriever == "embed":
        provider = _embed_provider(config)
        retriever = (provider, embedding.embed_corpus(provider, corpus, config.embed.batch_size))
    else:
        raise ConfigError(f"unknown eval.retriever {config.eval.retriever!r}")
    run = evaluation.make_run(retriever, queries, corpus, depth)
    qrels = evaluation.read_qrels(qrels_path)
    result = evaluation.ndcg_at_k(run, qrels, k)
    out = _out(config)
    evaluation.write_run(run, str(out / "eval.run.trec"), tag=config.eval.retriever)
    with open(out / "eval.metrics.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "metric": f"ndcg@{k}",
                "mean": result.mean,
                "per_query": result.per_query,
                "skipped": result.skipped,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(f"ndcg@{k}: {result.mean:.5f} over {len(result.per_query)} queries")
    return 0


def cmd_report(config: PipelineConfig, args) -> int:
    cells, published_avg, _ = evaluation.load_reference_cells(args.cells)
    if args.dry_run:
        configs = {c for c, _ in cells}
        print(f"plan: aggregate {len(configs)} configurations x {len(cells) // len(configs)} datasets")
        return 0
    report = evaluation.aggregate_table(cells)
    comparisons = evaluation.compare_aggregated_vs_individual(report.averages)
    out = _out(config)
    out.mkdir(parents=True, exist_ok=True)
    lines = [report.table, ""]
    for comp in comparisons:
        lines.append(
            f"{comp.aggregated_config}: aggregated {comp.aggregated:.3f} vs "
            f"individual mean {comp.individual_mean:.5f} (diff {comp.difference:+.5f})"
        )
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text, encoding="utf-8")
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "averages": report.averages,
                "published_averages": published_avg,
                "cells": {f"{c}/{d}": v for (c, d), v in cells.items()},
                "comparisons": [dataclasses.asdict(c) for c in comparisons],
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hardneg",
        description="Hard-negative mining, synthesis and dataset composition pipeline.",
    )
    parser.add_argument("--config", required=True, help="JSON pipeline config")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--dry-run", action="store_true", help="print the plan, write nothing")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", help="load pairs, build/sample the corpus")
    p_mine = sub.add_parser("mine", help="mine hard negatives from the corpus")
    p_mine.add_argument("--source", choices=["bm25", "embed"], required=True)
    p_mine.add_argument("--k", type=int, help="negatives per pair")
    p_gen = sub.add_parser("generate", help="generate hard negatives via the chat endpoint")
    p_gen.add_argument("--model", help="generate for a single model id")
    p_mix = sub.add_parser("mix", help="compose recipes into triplet files")
    p_mix.add_argument("--recipe", help="recipe name, or 'all' for the 22 reference recipes")
    p_eval = sub.add_parser("eval", help="build a retrieval run and score ndcg@k")
    p_eval.add_argument("--qrels", help="TREC qrels file")
    p_eval.add_argument("--depth", type=int)
    p_eval.add_argument("--k", type=int)
    p_report = sub.add_parser("report", help="aggregate result cells and compare families")
    p_report.add_argument("--cells", help="cells JSON (defaults to the packaged published results)")
    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "mine": cmd_mine,
    "generate": cmd_generate,
    "mix": cmd_mix,
    "eval": cmd_eval,
    "report": cmd_report,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        return _COMMANDS[args.command](config, args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return 1
    except DataFormatError as exc:
        log.error("data error: %s", exc)
        return 2
    except (TransportError, GenerationError) as exc:
        log.error("transport error: %s", exc)
        return 3
    except PipelineError as exc:
        log.error("%s", exc)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        log.error("data error: %s", exc)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
