"""Triplet-file loading and the deterministic train/validation split.

Consumes the mining toolkit's export format verbatim: JSONL lines of
{"query", "pos", "negs", "tags"}, optionally checked against the
accompanying manifest's sha256 and example count.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass


@dataclass
class Triplet:
    query: str
    positive: str
    negatives: list[str]


def load_triplets(path: str, manifest_path: str | None = None) -> list[Triplet]:
    triplets: list[Triplet] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                triplets.append(Triplet(obj["query"], obj["pos"], list(obj["negs"])))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{line_no}: bad triplet line: {exc}") from exc
    if manifest_path is not None:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        if manifest.get("sha256") != digest:
            raise ValueError(f"{path}: sha256 does not match manifest {manifest_path}")
        if manifest.get("examples") != len(triplets):
            raise ValueError(
                f"{path}: {len(triplets)} examples but manifest says {manifest.get('examples')}"
            )
    return triplets


def split_triplets(
    triplets: list[Triplet], train_fraction: float, seed: int
) -> tuple[list[Triplet], list[Triplet]]:
    """Seeded-shuffle split; identical (data, seed) gives identical membership."""
    if not (0.0 < train_fraction <= 1.0):
        raise ValueError(f"train_fraction must be in (0, 1], got {train_fraction}")
    order = list(range(len(triplets)))
    random.Random(seed).shuffle(order)
    cut = round(len(order) * train_fraction)
    train = [triplets[i] for i in sorted(order[:cut])]
    val = [triplets[i] for i in sorted(order[cut:])]
    return train, val
