"""Training loop: batches, periodic evaluation, early stopping, checkpoints.

Each batch's candidate pool is all in-batch positives followed by every hard
negative the batch's examples carry (standard MNRL-with-hard-negatives).
Validation runs every eval_every optimizer steps; training halts early after
early_stop_patience consecutive evaluations without improvement. The best
checkpoint by validation loss is kept, written atomically.

The optimizer is Adam with the usual defaults; it and the learning rate are
unpinned by the protocol and recorded in the log header instead.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .data import Triplet, load_triplets, split_triplets
from .encoder import EncoderSpec, TinyEncoder
from .loss import mnrl_loss, mnrl_loss_and_grad


@dataclass(frozen=True)
class TrainProtocol:
    epochs: int = 1
    batch_size: int = 16
    train_fraction: float = 0.9  # 90/10 train-validation split
    eval_every: int = 100
    early_stop_patience: int = 3
    scale: float = 20.0


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class TrainResult:
    steps: int = 0
    evaluations: int = 0
    initial_val_loss: float = math.inf
    best_val_loss: float = math.inf
    best_step: int = 0
    stopped_early: bool = False
    history: list[dict] = field(default_factory=list)
    checkpoint_dir: str = ""
    log_path: str = ""


class Adam:
    def __init__(self, shape, config: OptimizerConfig):
        self.config = config
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, weights: np.ndarray, grad: np.ndarray) -> None:
        c = self.config
        self.t += 1
        self.m = c.beta1 * self.m + (1 - c.beta1) * grad
        self.v = c.beta2 * self.v + (1 - c.beta2) * grad * grad
        m_hat = self.m / (1 - c.beta1**self.t)
        v_hat = self.v / (1 - c.beta2**self.t)
        weights -= c.learning_rate * m_hat / (np.sqrt(v_hat) + c.eps)


def _batches(n: int, batch_size: int):
    for start in range(0, n, batch_size):
        yield range(start, min(start + batch_size, n))


def _batch_arrays(encoder: TinyEncoder, batch: list[Triplet]):
    queries = [t.query for t in batch]
    candidates = [t.positive for t in batch]
    for t in batch:
        candidates.extend(t.negatives)
    positive_index = np.arange(len(batch))
    feat_q = encoder.featurize(queries)
    feat_c = encoder.featurize(candidates)
    return feat_q, feat_c, positive_index


def evaluate_loss(encoder: TinyEncoder, triplets: list[Triplet], protocol: TrainProtocol) -> float:
    """Mean MNRL loss over the set, batched like training."""
    if not triplets:
        return math.nan
    losses = []
    for idx in _batches(len(triplets), protocol.batch_size):
        batch = [triplets[i] for i in idx]
        feat_q, feat_c, pos = _batch_arrays(encoder, batch)
        losses.append(
            mnrl_loss(feat_q @ encoder.weights, feat_c @ encoder.weights, pos, protocol.scale)
        )
    return float(np.mean(losses))


def train(
    triplet_file: str,
    protocol: TrainProtocol = TrainProtocol(),
    encoder_spec: EncoderSpec = EncoderSpec(),
    out_dir: str = "train_out",
    seed: int = 0,
    manifest_path: str | None = None,
    optimizer_config: OptimizerConfig = OptimizerConfig(),
    evaluator: Callable[[TinyEncoder], float] | None = None,
) -> TrainResult:
    """Train a TinyEncoder on a triplet file; returns the run summary.

    evaluator overrides the validation-loss computation (used by tests to
    script plateaus); it receives the current encoder and returns a loss.
    """
    triplets = load_triplets(triplet_file, manifest_path)
    if not triplets:
        raise ValueError(f"{triplet_file}: no triplets")
    train_set, val_set = split_triplets(triplets, protocol.train_fraction, seed)
    encoder = TinyEncoder(encoder_spec)
    adam = Adam(encoder.weights.shape, optimizer_config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint_dir = out / "checkpoint"
    log_path = out / "train_log.jsonl"

    def measure() -> float:
        if evaluator is not None:
            return float(evaluator(encoder))
        return evaluate_loss(encoder, val_set, protocol)

    result = TrainResult(checkpoint_dir=str(checkpoint_dir), log_path=str(log_path))
    order_rng = random.Random(seed + 1)
    with log_path.open("w", encoding="utf-8") as log:
        log.write(
            json.dumps(
                {
                    "event": "start",
                    "triplets": len(triplets),
                    "train": len(train_set),
                    "val": len(val_set),
                    "protocol": asdict(protocol),
                    "optimizer": {"name": "adam", **asdict(optimizer_config)},
                    "encoder": asdict(encoder_spec),
                    "seed": seed,
                }
            )
            + "\n"
        )
        result.initial_val_loss = measure()
        result.best_val_loss = result.initial_val_loss
        result.best_step = 0
        encoder.save(str(checkpoint_dir))
        log.write(json.dumps({"step": 0, "train_loss": None, "val_loss": result.initial_val_loss}) + "\n")

        bad_evals = 0
        stop = False
        for _ in range(protocol.epochs):
            if stop:
                break
            epoch_order = train_set[:]
            order_rng.shuffle(epoch_order)
            for idx in _batches(len(epoch_order), protocol.batch_size):
                batch = [epoch_order[i] for i in idx]
                feat_q, feat_c, pos = _batch_arrays(encoder, batch)
                loss, d_q, d_c = mnrl_loss_and_grad(
                    feat_q @ encoder.weights, feat_c @ encoder.weights, pos, protocol.scale
                )
                grad = feat_q.T @ d_q + feat_c.T @ d_c
                adam.step(encoder.weights, grad)
                result.steps += 1

                if result.steps % protocol.eval_every == 0:
                    val_loss = measure()
                    result.evaluations += 1
                    entry = {"step": result.steps, "train_loss": loss, "val_loss": val_loss}
                    result.history.append(entry)
                    log.write(json.dumps(entry) + "\n")
                    if val_loss < result.best_val_loss:
                        result.best_val_loss = val_loss
                        result.best_step = result.steps
                        encoder.save(str(checkpoint_dir))
                        bad_evals = 0
                    else:
                        bad_evals += 1
                        if bad_evals >= protocol.early_stop_patience:
                            result.stopped_early = True
                            stop = True
                            break

        # end-of-training evaluation unless the last step already had one
        if not result.stopped_early and (result.steps % protocol.eval_every != 0 or result.steps == 0):
            val_loss = measure()
            result.evaluations += 1
            entry = {"step": result.steps, "train_loss": None, "val_loss": val_loss}
            result.history.append(entry)
            log.write(json.dumps(entry) + "\n")
            if val_loss < result.best_val_loss:
                result.best_val_loss = val_loss
                result.best_step = result.steps
                encoder.save(str(checkpoint_dir))
        log.write(
            json.dumps(
                {
                    "event": "end",
                    "steps": result.steps,
                    "evaluations": result.evaluations,
                    "best_step": result.best_step,
                    "best_val_loss": result.best_val_loss,
                    "stopped_early": result.stopped_early,
                }
            )
            + "\n"
        )
    return result
