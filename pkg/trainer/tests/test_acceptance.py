"""Acceptance suite for the fine-tuning harness, one test per criterion."""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from mnrl_trainer.encoder import EncoderSpec
from mnrl_trainer.loss import mnrl_loss, mnrl_loss_and_grad
from mnrl_trainer.train import OptimizerConfig, TrainProtocol, train

from test_train import synthetic_triplets


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE FAIL: {name}")
        raise
    print(f"\nACCEPTANCE PASS: {name}")


def test_mnrl_unit_checks():
    with criterion("MNRL unit checks: ln C, 0.31326 worked example, finite-difference gradient"):
        # uniform softmax: C identical candidates
        for c in (2, 4, 7):
            loss = mnrl_loss(
                np.array([[1.0, 0.0]]), np.tile([[0.6, 0.8]], (c, 1)), np.array([0]), scale=20.0
            )
            assert abs(loss - math.log(c)) <= 1e-9

        # B=1, cos(q, pos)=1, cos(q, neg)=0, scale 1
        loss = mnrl_loss(
            np.array([[1.0, 0.0]]), np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([0]), scale=1.0
        )
        assert loss == pytest.approx(0.31326, abs=1e-5)

        # analytic gradient vs central finite differences, relative error < 1e-4
        # (denominator floored at 1e-3: sub-noise-floor coordinates have no
        # meaningful relative error in float64)
        rng = np.random.default_rng(11)
        q = rng.standard_normal((2, 5))
        c = rng.standard_normal((6, 5))
        pos = np.array([0, 3])
        _, d_q, d_c = mnrl_loss_and_grad(q, c, pos, scale=20.0)
        h = 1e-4
        for x, grad, is_candidates in ((q, d_q, False), (c, d_c, True)):
            fd = np.zeros_like(x)
            for i in np.ndindex(x.shape):
                plus, minus = x.copy(), x.copy()
                plus[i] += h
                minus[i] -= h
                if is_candidates:
                    fd[i] = (mnrl_loss(q, plus, pos, 20.0) - mnrl_loss(q, minus, pos, 20.0)) / (2 * h)
                else:
                    fd[i] = (mnrl_loss(plus, c, pos, 20.0) - mnrl_loss(minus, c, pos, 20.0)) / (2 * h)
            rel = np.abs(grad - fd) / np.maximum.reduce([np.abs(fd), np.abs(grad), np.full_like(fd, 1e-3)])
            assert np.max(rel) < 1e-4


def test_training_smoke(tmp_path):
    with criterion("training smoke: separable pairs improve validation loss; early stop after 3 plateaus; < 5 min"):
        started = time.perf_counter()

        path = synthetic_triplets(tmp_path / "t.jsonl", n=200, topics=20, seed=5)
        protocol = TrainProtocol(epochs=3, batch_size=16, eval_every=5)
        result = train(
            path,
            protocol,
            EncoderSpec(feature_dim=1024, embed_dim=32, seed=1),
            str(tmp_path / "out"),
            seed=7,
            optimizer_config=OptimizerConfig(learning_rate=0.01),
        )
        assert result.best_val_loss < result.initial_val_loss

        calls = []

        def plateaued(encoder):
            calls.append(1)
            return 2.5

        stopped = train(
            path,
            TrainProtocol(epochs=50, batch_size=16, eval_every=1, early_stop_patience=3),
            EncoderSpec(feature_dim=256, embed_dim=16),
            str(tmp_path / "out2"),
            evaluator=plateaued,
        )
        assert stopped.stopped_early
        assert stopped.evaluations == 3

        elapsed = time.perf_counter() - started
        assert elapsed < 300.0, f"took {elapsed:.1f}s"
