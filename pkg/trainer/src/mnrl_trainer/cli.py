"""Command line for the MNRL fine-tuning harness.

Mirrors the mining toolkit's conventions: an optional JSON config file with
"protocol", "optimizer" and "encoder" sections, and flags that win over file
values.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .encoder import EncoderSpec
from .train import OptimizerConfig, TrainProtocol, train


def _section(cls, data: dict, name: str):
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - fields
    if unknown:
        raise SystemExit(f"unknown config key(s) in {name}: {sorted(unknown)}")
    return cls(**data)


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(prog="mnrl-train", description="Fine-tune a tiny bi-encoder on a triplet file.")
    parser.add_argument("--triplets", required=True, help="triplet JSONL file")
    parser.add_argument("--manifest", help="manifest to verify the triplet file against")
    parser.add_argument("--out", default="train_out", help="output directory")
    parser.add_argument("--config", help="JSON config with protocol/optimizer/encoder sections")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--eval-every", type=int)
    args = parser.parse_args(argv)

    protocol_kwargs, optimizer_kwargs, encoder_kwargs = {}, {}, {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
        protocol_kwargs = config.get("protocol", {})
        optimizer_kwargs = config.get("optimizer", {})
        encoder_kwargs = config.get("encoder", {})
    for key, value in (("epochs", args.epochs), ("batch_size", args.batch_size), ("eval_every", args.eval_every)):
        if value is not None:
            protocol_kwargs[key] = value

    result = train(
        args.triplets,
        protocol=_section(TrainProtocol, protocol_kwargs, "protocol"),
        encoder_spec=_section(EncoderSpec, encoder_kwargs, "encoder"),
        out_dir=args.out,
        seed=args.seed,
        manifest_path=args.manifest,
        optimizer_config=_section(OptimizerConfig, optimizer_kwargs, "optimizer"),
    )
    print(
        f"steps {result.steps}, evaluations {result.evaluations}, "
        f"val loss {result.initial_val_loss:.4f} -> {result.best_val_loss:.4f} "
        f"(best step {result.best_step}){' [early stop]' if result.stopped_early else ''}"
    )
    print(f"checkpoint: {result.checkpoint_dir}")
    print(f"log: {result.log_path}")


if __name__ == "__main__":
    sys.exit(main())
