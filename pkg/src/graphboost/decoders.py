"""Decoders: pairwise similarity and node label distributions."""

from __future__ import annotations

from typing import Dict

import numpy as np

from .tensor import (
    Tensor,
    add,
    constant,
    elementwise_mul,
    leaky_relu,
    matmul,
    sigmoid,
    softmax_rows,
)

__all__ = ["decode_pairwise", "decode_node", "decode_mlp_pairwise", "decode_mlp_node"]


def decode_pairwise(z_i: Tensor, z_j: Tensor) -> Tensor:
    """Similarity in [0, 1]: sigmoid of the embedding dot product, per row."""
    if z_i.shape != z_j.shape:
        raise ValueError(f"embedding shapes differ: {z_i.shape} vs {z_j.shape}")
    ones = constant(np.ones((z_i.shape[1], 1)))
    return sigmoid(matmul(elementwise_mul(z_i, z_j), ones))


def _mlp(z: Tensor, decoder: Dict[str, Tensor]) -> Tensor:
    hidden = leaky_relu(add(matmul(z, decoder["w1"]), decoder["b1"]))
    return add(matmul(hidden, decoder["w2"]), decoder["b2"])


def decode_node(z: Tensor, decoder: Dict[str, Tensor]) -> Tensor:
    """Label distribution per row: softmax over a one-hidden-layer head."""
    return softmax_rows(_mlp(z, decoder))


def decode_mlp_pairwise(z_i: Tensor, z_j: Tensor, decoder: Dict[str, Tensor]) -> Tensor:
    """Nonlinear pairwise decoder over the elementwise product of embeddings."""
    if z_i.shape != z_j.shape:
        raise ValueError(f"embedding shapes differ: {z_i.shape} vs {z_j.shape}")
    if z_i.shape[1] != decoder["w1"].shape[0]:
        raise ValueError(
            f"embedding dim {z_i.shape[1]} does not match decoder input {decoder['w1'].shape[0]}")
    return sigmoid(_mlp(elementwise_mul(z_i, z_j), decoder))


def decode_mlp_node(z: Tensor, decoder: Dict[str, Tensor]) -> Tensor:
    """Nonlinear node decoder over a (possibly concatenated) embedding."""
    if z.shape[1] != decoder["w1"].shape[0]:
        raise ValueError(
            f"embedding dim {z.shape[1]} does not match decoder input {decoder['w1'].shape[0]}")
    return softmax_rows(_mlp(z, decoder))
