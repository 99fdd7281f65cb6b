"""Weighted losses: binary cross entropy for links, cross entropy for labels."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, add, clip, constant, elementwise_mul, log, reduce_sum, scale

__all__ = ["link_loss", "node_loss", "multitask_loss"]


def _column(arr, name: str) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64).reshape(-1, 1)
    return out


def link_loss(scores: Tensor, labels, weights) -> Tensor:
    """Per-example weighted binary cross entropy, summed.

    ``scores`` is the (B, 1) decoder output; predictions are clamped so the
    logs stay finite.
    """
    y = _column(labels, "labels")
    w = _column(weights, "weights")
    if scores.shape != y.shape or y.shape != w.shape:
        raise ValueError(
            f"link_loss: scores {scores.shape}, labels {y.shape} and weights {w.shape} must align")
    if (w <= 0).any():
        raise ValueError("link_loss: weights must be positive")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("link_loss: labels must be binary")
    s = clip(scores)
    one_minus = add(constant(1.0), scale(s, -1.0))
    term = add(
        elementwise_mul(constant(y), log(s)),
        elementwise_mul(constant(1.0 - y), log(one_minus)),
    )
    return scale(reduce_sum(elementwise_mul(constant(w), term)), -1.0)


def node_loss(dists: Tensor, label_matrix, weights) -> Tensor:
    """Weighted cross entropy between label rows and predicted distributions."""
    y = np.asarray(label_matrix, dtype=np.float64)
    w = _column(weights, "weights")
    if dists.shape != y.shape:
        raise ValueError(f"node_loss: predictions {dists.shape} vs labels {y.shape}")
    if w.shape[0] != y.shape[0]:
        raise ValueError(f"node_loss: {w.shape[0]} weights for {y.shape[0]} rows")
    if (w <= 0).any():
        raise ValueError("node_loss: weights must be positive")
    if (y < 0).any() or np.abs(y.sum(axis=1) - 1.0).max() > 1e-9:
        raise ValueError("node_loss: label rows must be normalized distributions")
    picked = elementwise_mul(constant(y), log(clip(dists)))
    return scale(reduce_sum(elementwise_mul(constant(w), picked)), -1.0)


def multitask_loss(link_part: Tensor, node_part: Tensor, mix: float) -> Tensor:
    """Convex blend: mix * link + (1 - mix) * node."""
    if not 0.0 <= mix <= 1.0:
        raise ValueError(f"mix must lie in [0, 1], got {mix}")
    return add(scale(link_part, mix), scale(node_part, 1.0 - mix))
