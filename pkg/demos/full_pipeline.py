"""
The whole pipeline through the CLI, plus fine-tuning on the result
==================================================================

Drives ingest -> mine (bm25, embed) -> generate (mock endpoint) -> mix ->
eval -> report with one JSON config, exactly as an operator would from the
shell, then hands one exported triplet file to the mnrl-trainer package.

Every stage is deterministic given the config seed: run it twice and the
manifests carry identical sha256 values.
"""

import json
import tempfile
from pathlib import Path

from hardneg.cli import run
from hardneg.mixer import LLM_LABELS
from hardneg.mockserver import MockProviderServer

workdir = Path(tempfile.mkdtemp(prefix="hardneg-demo-"))
out = workdir / "out"

# --- input pair file (Tevatron-style layout) ----------------------------------
pairs_file = workdir / "pairs.jsonl"
with pairs_file.open("w") as fh:
    topics = ["bm25 scoring", "dense retrieval", "hard negatives", "evaluation metrics"]
    for i, topic in enumerate(topics):
        fh.write(
            json.dumps(
                {
                    "query_id": f"q{i}",
                    "query": f"explain {topic}",
                    "positive_passages": [
                        {
                            "docid": f"pos{i}",
                            "title": topic,
                            "text": f"A short passage explaining {topic} in enough detail to answer the query.",
                        }
                    ],
                }
            )
            + "\n"
        )

# distractors so mining has something to rank
extra_file = workdir / "extra.jsonl"
with extra_file.open("w") as fh:
    for i in range(12):
        fh.write(
            json.dumps(
                {"docid": f"x{i}", "title": "", "text": f"Unrelated filler passage number {i} about corpora."}
            )
            + "\n"
        )

with MockProviderServer() as server:
    config_file = workdir / "config.json"
    config_file.write_text(
        json.dumps(
            {
                "seed": 42,
                "paths": {"pairs": str(pairs_file), "corpus": str(extra_file), "out_dir": str(out)},
                "bm25": {"k": 5},
                "embed": {"endpoint": server.url, "model_id": "hashed-bow", "batch_size": 8, "k": 5},
                "llm": {"endpoint": server.url, "model_id": list(LLM_LABELS)},
                "eval": {"depth": 16, "k": 10},
            },
            indent=2,
        )
    )

    base = ["--config", str(config_file)]
    for stage in (
        ["ingest"],
        ["mine", "--source", "bm25"],
        ["mine", "--source", "embed"],
        ["generate"],
        ["mix", "--recipe", "all"],
        ["eval"],
        ["report"],
    ):
        print(f"\n$ hardneg --config config.json {' '.join(stage)}")
        code = run(base + stage)
        assert code == 0, f"stage {stage} exited {code}"

print(f"\nartifacts in {out}:")
for path in sorted(out.rglob("*")):
    if path.is_file():
        print(f"  {path.relative_to(out)}")

manifest = json.loads((out / "triplets" / "bm25+ce+phi4-14b.jsonl.manifest.json").read_text())
print(f"\nexample manifest (bm25+ce+phi4-14b): {manifest['examples']} examples, sha256 {manifest['sha256'][:16]}...")

# --- fine-tune a tiny bi-encoder on one exported recipe -------------------------
try:
    from mnrl_trainer import EncoderSpec, TrainProtocol, train
except ImportError:
    print("\nmnrl-trainer not installed; skipping the fine-tuning step")
else:
    triplets = out / "triplets" / "all-llms+bm25+ce.jsonl"
    result = train(
        str(triplets),
        TrainProtocol(epochs=2, batch_size=16, eval_every=2),
        EncoderSpec(feature_dim=1024, embed_dim=32),
        out_dir=str(workdir / "train_out"),
        seed=7,
        manifest_path=str(triplets) + ".manifest.json",
    )
    print(
        f"\ntrained on {triplets.name}: {result.steps} steps, "
        f"val loss {result.initial_val_loss:.4f} -> {result.best_val_loss:.4f}, "
        f"checkpoint at {result.checkpoint_dir}"
    )
