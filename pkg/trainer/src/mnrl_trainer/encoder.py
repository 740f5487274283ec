"""Tiny randomly initialized bi-encoder: hashed bag-of-words -> linear map.

Desk-scale stand-in for a transformer encoder: fast, deterministic, and
trainable with plain numpy. Texts hash into a fixed-size sparse count vector;
a single weight matrix projects counts into the embedding space.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass

import numpy as np

_WORD = re.compile(r"[^\W_]+(?:['\-][^\W_]+)*", re.UNICODE)


def _bucket(token: str, buckets: int) -> tuple[int, int]:
    h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")
    sign = 1 if (h >> 60) & 1 == 0 else -1
    return h % buckets, sign


@dataclass(frozen=True)
class EncoderSpec:
    feature_dim: int = 2048
    embed_dim: int = 64
    seed: int = 0


class TinyEncoder:
    def __init__(self, spec: EncoderSpec):
        self.spec = spec
        rng = np.random.default_rng(spec.seed)
        self.weights = rng.standard_normal((spec.feature_dim, spec.embed_dim)) / np.sqrt(
            spec.feature_dim
        )

    def featurize(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.spec.feature_dim), dtype=np.float64)
        for row, text in enumerate(texts):
            for token in _WORD.findall(text.casefold()):
                idx, sign = _bucket(token, self.spec.feature_dim)
                out[row, idx] += sign
        return out

    def encode(self, texts: list[str]) -> np.ndarray:
        """Raw (unnormalized) embeddings; the loss normalizes internally."""
        return self.featurize(texts) @ self.weights

    def encode_unit(self, texts: list[str]) -> np.ndarray:
        raw = self.encode(texts)
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return raw / norms

    def save(self, directory: str) -> None:
        """Atomic checkpoint write: temp file then rename."""
        os.makedirs(directory, exist_ok=True)
        tmp = os.path.join(directory, ".weights.tmp")
        with open(tmp, "wb") as fh:
            np.savez(fh, weights=self.weights)
        os.replace(tmp, os.path.join(directory, "weights.npz"))
        with open(os.path.join(directory, "encoder.json"), "w", encoding="utf-8") as fh:
            json.dump(
                {
                    "feature_dim": self.spec.feature_dim,
                    "embed_dim": self.spec.embed_dim,
                    "seed": self.spec.seed,
                },
                fh,
                indent=2,
            )
            fh.write("\n")

    @classmethod
    def load(cls, directory: str) -> "TinyEncoder":
        with open(os.path.join(directory, "encoder.json"), encoding="utf-8") as fh:
            meta = json.load(fh)
        encoder = cls(EncoderSpec(meta["feature_dim"], meta["embed_dim"], meta["seed"]))
        encoder.weights = np.load(os.path.join(directory, "weights.npz"))["weights"]
        return encoder
