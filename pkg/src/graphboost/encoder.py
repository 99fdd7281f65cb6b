"""One-layer neighborhood encoders: mean-pool and additive attention.

An encoder projects a sampled neighborhood to one embedding space.  The
whole batch is expressed as a handful of tensor ops: neighbor rows are
stacked flat, and per-example aggregation happens through constant
block-structured matrices (mean weights, block sums, block expansion), so
variable neighborhood sizes need no padding.  Softmax over each example's
block of attention scores is built from exp/log/matmul with an off-tape
per-block max shift, which keeps it numerically stable and differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .graphs import Graph, NeighborhoodSample
from .tensor import (
    Tensor,
    add,
    concat_columns,
    constant,
    elementwise_mul,
    exp,
    leaky_relu,
    log,
    matmul,
    parameter,
    repeat_rows,
    scale,
    segment_max_values,
    segment_mean,
    segment_sum,
)

__all__ = [
    "EncoderConfig",
    "WeakLearnerParams",
    "glorot",
    "init_weak_learner",
    "encode",
    "encode_batch",
    "node_embeddings",
]

_KINDS = ("mean_pool", "attention")


@dataclass(frozen=True)
class EncoderConfig:
    kind: str
    input_dim: int
    embed_dim: int
    num_heads: int = 1
    num_layers: int = 1
    neighbor_sample_size: int = 10
    include_self_in_node_task: bool = False

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown encoder kind {self.kind!r}; valid: {_KINDS}")
        if self.num_layers != 1:
            raise ValueError("num_layers is fixed at 1")
        if self.input_dim < 1 or self.embed_dim < 1 or self.num_heads < 1:
            raise ValueError("input_dim, embed_dim and num_heads must be positive")
        if self.kind == "attention" and self.embed_dim % self.num_heads:
            raise ValueError(
                f"embed_dim {self.embed_dim} must be divisible by num_heads {self.num_heads}")
        if self.neighbor_sample_size < 1:
            raise ValueError("neighbor_sample_size must be positive")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.num_heads


@dataclass
class WeakLearnerParams:
    """One weak learner: encoder weights, decoder weights, combination weight."""

    encoder: Dict[str, Tensor]
    decoder: Dict[str, Tensor] = field(default_factory=dict)
    alpha: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")

    def all_params(self) -> List[Tensor]:
        return list(self.encoder.values()) + list(self.decoder.values())

    def check_finite(self) -> None:
        for name, t in {**self.encoder, **self.decoder}.items():
            if not np.isfinite(t.values).all():
                raise ValueError(f"parameter {name!r} contains non-finite values")

    def copy_values(self) -> dict:
        return {name: t.values.copy()
                for name, t in list(self.encoder.items()) + list(self.decoder.items())}

    def restore_values(self, snapshot: dict) -> None:
        for name, t in list(self.encoder.items()) + list(self.decoder.items()):
            t.values[...] = snapshot[name]


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out) if shape is None else shape)


def init_weak_learner(config: EncoderConfig, rng: np.random.Generator,
                      label_dim: Optional[int] = None,
                      decoder_hidden: Optional[int] = None) -> WeakLearnerParams:
    """Fresh Glorot-initialized parameters.

    ``label_dim`` adds the node-decoder head (hidden layer + softmax
    projection); pairwise decoding is a parameter-free dot product.
    """
    dv, dz = config.input_dim, config.embed_dim
    enc: Dict[str, Tensor] = {}
    if config.kind == "mean_pool":
        enc["w_nbr"] = parameter(glorot(rng, dv, dz))
    else:
        dh = config.head_dim
        for h in range(config.num_heads):
            enc[f"w_head{h}"] = parameter(glorot(rng, dv, dh))
            enc[f"a_src{h}"] = parameter(glorot(rng, dh, 1, shape=(dh, 1)))
            enc[f"a_dst{h}"] = parameter(glorot(rng, dh, 1, shape=(dh, 1)))
    enc["w_self"] = parameter(glorot(rng, dv, dz))
    enc["w_comb"] = parameter(glorot(rng, 2 * dz, dz))
    enc["b_comb"] = parameter(np.zeros((1, dz)))

    dec: Dict[str, Tensor] = {}
    if label_dim is not None:
        hidden = decoder_hidden or dz
        dec["w1"] = parameter(glorot(rng, dz, hidden))
        dec["b1"] = parameter(np.zeros((1, hidden)))
        dec["w2"] = parameter(glorot(rng, hidden, label_dim))
        dec["b2"] = parameter(np.zeros((1, label_dim)))
    return WeakLearnerParams(encoder=enc, decoder=dec)


def encode_batch(params: WeakLearnerParams, config: EncoderConfig,
                 features: np.ndarray, centers: Sequence[int],
                 neighbor_lists: Sequence[np.ndarray],
                 include_self: bool = True,
                 attention_out: Optional[list] = None) -> Tensor:
    """Embed a batch of centers given their sampled neighbor lists.

    Returns a (B, embed_dim) tensor.  ``attention_out``, when given,
    receives one flat per-head weight array per head (diagnostics only).
    """
    if features.shape[1] != config.input_dim:
        raise ValueError(
            f"feature dimension {features.shape[1]} does not match "
            f"encoder input_dim {config.input_dim}")
    lengths = [len(n) for n in neighbor_lists]
    if len(lengths) != len(centers):
        raise ValueError("one neighbor list per center is required")
    # Canonical neighbor order fixes the summation order, making the
    # embedding exactly invariant to neighbor-list permutation.
    ordered = [np.sort(np.asarray(n, dtype=np.int64)) for n in neighbor_lists]
    flat = np.concatenate(ordered) if sum(lengths) else np.zeros(0, dtype=np.int64)
    centers = np.asarray(centers, dtype=np.int64)
    xc = constant(features[centers])
    xn = constant(features[flat])
    lengths_arr = np.asarray(lengths, dtype=np.int64)
    empty_col = (lengths_arr == 0).astype(np.float64)[:, None]

    if config.kind == "mean_pool":
        agg = segment_mean(matmul(xn, params.encoder["w_nbr"]), lengths_arr)
    else:
        heads = []
        for h in range(config.num_heads):
            hn = matmul(xn, params.encoder[f"w_head{h}"])
            sn = matmul(hn, params.encoder[f"a_dst{h}"])
            if include_self:
                hc = matmul(xc, params.encoder[f"w_head{h}"])
                sc = matmul(hc, params.encoder[f"a_src{h}"])
                score = leaky_relu(add(repeat_rows(sc, lengths_arr), sn))
            else:
                score = leaky_relu(sn)
            shift = segment_max_values(score.values, lengths_arr)
            shifted = add(score, constant(-shift))
            e = exp(shifted)
            sums = add(segment_sum(e, lengths_arr), constant(empty_col))
            log_rows = repeat_rows(log(sums), lengths_arr)
            weights = exp(add(shifted, scale(log_rows, -1.0)))
            if attention_out is not None:
                attention_out.append(weights.values.copy())
            heads.append(segment_sum(elementwise_mul(weights, hn), lengths_arr))
        agg = heads[0] if len(heads) == 1 else concat_columns(heads)

    if include_self:
        self_part = matmul(xc, params.encoder["w_self"])
    else:
        self_part = matmul(constant(np.zeros_like(features[centers])), params.encoder["w_self"])
    combined = concat_columns([self_part, agg])
    return leaky_relu(add(matmul(combined, params.encoder["w_comb"]), params.encoder["b_comb"]))


def encode(params: WeakLearnerParams, config: EncoderConfig, graph: Graph,
           center: int, neighborhood: NeighborhoodSample,
           include_self: bool = True) -> Tensor:
    """Embed a single node from its sampled neighborhood; returns (1, embed_dim)."""
    if graph.node_features is None:
        raise ValueError("graph has no node features attached")
    nbrs = np.asarray(neighborhood.neighbor_ids, dtype=np.int64)
    return encode_batch(params, config, graph.node_features, [center], [nbrs],
                        include_self=include_self)


def node_embeddings(params: WeakLearnerParams, config: EncoderConfig, graph: Graph,
                    nodes: Optional[Sequence[int]] = None, seed: int = 0,
                    include_self: bool = True,
                    time_cutoffs: Optional[Sequence[float]] = None,
                    chunk: int = 1024) -> np.ndarray:
    """Evaluation-mode embeddings for a set of nodes (no tape, fixed sampling).

    Neighbor subsets are drawn per (seed, node), so embeddings do not depend
    on chunking or on which other nodes are requested.
    """
    if graph.node_features is None:
        raise ValueError("graph has no node features attached")
    nodes = np.arange(graph.num_nodes) if nodes is None else np.asarray(nodes, dtype=np.int64)
    out = np.empty((nodes.size, config.embed_dim))
    size = config.neighbor_sample_size
    for lo in range(0, nodes.size, chunk):
        batch = nodes[lo:lo + chunk]
        lists = []
        for i, node in enumerate(batch):
            cutoff = None if time_cutoffs is None else time_cutoffs[lo + i]
            pool = graph.neighbors(int(node), time_cutoff=cutoff)
            if pool.size > size:
                rng = np.random.default_rng([seed, int(node)])
                pool = rng.choice(pool, size=size, replace=False)
            lists.append(pool)
        z = encode_batch(params, config, graph.node_features, batch, lists,
                         include_self=include_self)
        out[lo:lo + batch.size] = z.values
    return out
