"""Multiple-negatives ranking loss over cosine similarities.

Given B query vectors, C candidate vectors and the index of each query's
positive among the candidates,

    loss = -(1/B) * sum_i log( exp(s * cos(q_i, c_pos(i)))
                               / sum_j exp(s * cos(q_i, c_j)) )

with similarity scale s. Candidates are all in-batch positives plus every
provided hard negative. Vectors are normalized internally, so the loss (and
its gradient) is well defined for raw encoder outputs; on unit inputs the
normalization is a no-op.
"""

from __future__ import annotations

import numpy as np


def _unit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero vector has no direction")
    return x / norms, norms


def mnrl_loss(
    query_vecs: np.ndarray,
    candidate_vecs: np.ndarray,
    positive_index: np.ndarray,
    scale: float = 20.0,
) -> float:
    """Scalar loss; finite and >= 0 for any non-degenerate batch."""
    queries = np.atleast_2d(np.asarray(query_vecs, dtype=np.float64))
    candidates = np.atleast_2d(np.asarray(candidate_vecs, dtype=np.float64))
    pos = np.asarray(positive_index, dtype=np.int64)
    if queries.shape[0] == 0:
        raise ValueError("empty batch")
    if pos.shape[0] != queries.shape[0]:
        raise ValueError("positive_index must give one index per query")
    if np.any(pos < 0) or np.any(pos >= candidates.shape[0]):
        raise ValueError("positive_index out of range")
    q_unit, _ = _unit(queries)
    c_unit, _ = _unit(candidates)
    logits = scale * (q_unit @ c_unit.T)
    # stable log-sum-exp per row
    row_max = logits.max(axis=1, keepdims=True)
    lse = row_max.squeeze(1) + np.log(np.exp(logits - row_max).sum(axis=1))
    picked = logits[np.arange(len(pos)), pos]
    return float(np.mean(lse - picked))


def mnrl_loss_and_grad(
    query_vecs: np.ndarray,
    candidate_vecs: np.ndarray,
    positive_index: np.ndarray,
    scale: float = 20.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus analytic gradients w.r.t. the raw query and candidate vectors."""
    queries = np.atleast_2d(np.asarray(query_vecs, dtype=np.float64))
    candidates = np.atleast_2d(np.asarray(candidate_vecs, dtype=np.float64))
    pos = np.asarray(positive_index, dtype=np.int64)
    batch = queries.shape[0]
    q_unit, q_norm = _unit(queries)
    c_unit, c_norm = _unit(candidates)
    logits = scale * (q_unit @ c_unit.T)
    row_max = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - row_max)
    softmax = exp / exp.sum(axis=1, keepdims=True)
    picked = logits[np.arange(batch), pos]
    loss = float(np.mean((row_max.squeeze(1) + np.log(exp.sum(axis=1))) - picked))

    d_logits = softmax.copy()
    d_logits[np.arange(batch), pos] -= 1.0
    d_logits /= batch
    # gradient w.r.t. the unit vectors
    d_q_unit = scale * (d_logits @ c_unit)
    d_c_unit = scale * (d_logits.T @ q_unit)
    # back through x_hat = x / |x|:  dx = (g - (g . x_hat) x_hat) / |x|
    d_q = (d_q_unit - (d_q_unit * q_unit).sum(axis=1, keepdims=True) * q_unit) / q_norm
    d_c = (d_c_unit - (d_c_unit * c_unit).sum(axis=1, keepdims=True) * c_unit) / c_norm
    return loss, d_q, d_c
