"""Per-learner training loop: weighted mini-batch Adam with early stopping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .decoders import decode_node, decode_pairwise
from .encoder import EncoderConfig, WeakLearnerParams, encode_batch, init_weak_learner, node_embeddings
from .graphs import EdgeExample, Graph, NodeExample
from .losses import link_loss, multitask_loss, node_loss
from .metrics import average_precision
from .optim import AdamState, adam_step
from .sampling import sample_neighbor_lists
from .tensor import Tape, backward, constant, slice_rows, zero_grad

__all__ = [
    "TrainingConfig",
    "FitDiagnostics",
    "fit_weak_learner",
    "pairwise_scores",
    "node_distributions",
    "micro_ap",
]

_TASKS = ("link", "recommend", "multitask")


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-3
    epochs: int = 40
    patience: int = 5
    batch_size: int = 200

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0 or self.patience < 0:
            raise ValueError("invalid training configuration")


@dataclass
class FitDiagnostics:
    train_losses: List[float] = field(default_factory=list)
    val_aps: List[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_ap: float = float("nan")


def pairwise_scores(zmat: np.ndarray, examples: Sequence[EdgeExample]) -> np.ndarray:
    """Sigmoid dot-product similarity for each example, from an embedding table."""
    src = np.fromiter((e.src for e in examples), dtype=np.int64, count=len(examples))
    dst = np.fromiter((e.dst for e in examples), dtype=np.int64, count=len(examples))
    dots = np.einsum("ij,ij->i", zmat[src], zmat[dst])
    out = np.empty_like(dots)
    pos = dots >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-dots[pos]))
    ex = np.exp(dots[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def node_distributions(params: WeakLearnerParams, zmat: np.ndarray) -> np.ndarray:
    """Decoded label distributions for an embedding table (no tape)."""
    return decode_node(constant(zmat), params.decoder).values


def micro_ap(dists: np.ndarray, examples: Sequence[NodeExample]) -> float:
    """Average precision over flattened (node, class) relevance pairs."""
    scores, labels = [], []
    for ex in examples:
        row = dists[ex.node]
        rel = np.asarray(ex.label_vector) > 0
        scores.extend(row.tolist())
        labels.extend(int(r) for r in rel)
    return average_precision(np.asarray(scores), np.asarray(labels))


def _edge_batch_loss(params, config, graph, batch: Sequence[EdgeExample], rng):
    # Both endpoints are encoded in one pass; constant selection matrices
    # split the stacked embedding back into src/dst halves on the tape.
    centers = [e.src for e in batch] + [e.dst for e in batch]
    lists = sample_neighbor_lists(graph, centers, config.neighbor_sample_size, rng)
    z = encode_batch(params, config, graph.node_features, centers, lists)
    n = len(batch)
    scores = decode_pairwise(slice_rows(z, 0, n), slice_rows(z, n, 2 * n))
    labels = [e.label for e in batch]
    weights = [e.weight for e in batch]
    return link_loss(scores, labels, weights)


def _node_batch_loss(params, config, graph, batch: Sequence[NodeExample], rng):
    centers = [e.node for e in batch]
    lists = sample_neighbor_lists(graph, centers, config.neighbor_sample_size, rng)
    z = encode_batch(params, config, graph.node_features, centers, lists,
                     include_self=config.include_self_in_node_task)
    dists = decode_node(z, params.decoder)
    labels = np.stack([np.asarray(e.label_vector) for e in batch])
    weights = [e.weight for e in batch]
    return node_loss(dists, labels, weights)


def _val_ap(params, config, graph, task, val_edges, val_nodes, seed) -> float:
    aps = []
    if task in ("link", "multitask") and val_edges:
        nodes = sorted({e.src for e in val_edges} | {e.dst for e in val_edges})
        zmat = np.zeros((graph.num_nodes, config.embed_dim))
        zmat[nodes] = node_embeddings(params, config, graph, nodes=nodes, seed=seed)
        scores = pairwise_scores(zmat, val_edges)
        aps.append(average_precision(scores, np.array([e.label for e in val_edges])))
    if task in ("recommend", "multitask") and val_nodes:
        nodes = sorted({e.node for e in val_nodes})
        zmat = np.zeros((graph.num_nodes, config.embed_dim))
        zmat[nodes] = node_embeddings(params, config, graph, nodes=nodes, seed=seed,
                                      include_self=config.include_self_in_node_task)
        dists = node_distributions(params, zmat)
        aps.append(micro_ap(dists, val_nodes))
    return float(np.mean(aps)) if aps else float("nan")


def fit_weak_learner(graph: Graph, train_edges: Sequence[EdgeExample],
                     val_edges: Sequence[EdgeExample], config: EncoderConfig,
                     training: TrainingConfig, seed: int, task: str = "link",
                     train_nodes: Optional[Sequence[NodeExample]] = None,
                     val_nodes: Optional[Sequence[NodeExample]] = None,
                     mix: float = 0.5,
                     decoder_hidden: Optional[int] = None):
    """Train one weak learner on weighted examples.

    Early stopping monitors validation AP with the configured patience and
    restores the best snapshot.  Returns (params, diagnostics); with
    ``epochs=0`` the initialized parameters come back untouched.
    """
    if task not in _TASKS:
        raise ValueError(f"unknown task {task!r}; valid: {_TASKS}")
    if graph.node_features is None:
        raise ValueError("graph has no node features attached")
    needs_edges = task in ("link", "multitask")
    needs_nodes = task in ("recommend", "multitask")
    if needs_edges and not train_edges:
        raise ValueError("empty edge training set")
    if needs_nodes and not train_nodes:
        raise ValueError("empty node training set")

    rng = np.random.default_rng(seed)
    label_dim = None
    if needs_nodes:
        label_dim = len(train_nodes[0].label_vector)
    params = init_weak_learner(config, rng, label_dim=label_dim, decoder_hidden=decoder_hidden)
    diagnostics = FitDiagnostics()
    if training.epochs == 0:
        return params, diagnostics

    tensors = params.all_params()
    state = AdamState.for_params(tensors, learning_rate=training.learning_rate)
    shuffle_rng = np.random.default_rng(rng.integers(2**63))
    sampler_rng = np.random.default_rng(rng.integers(2**63))
    eval_seed = int(rng.integers(2**63))

    edge_list = list(train_edges) if needs_edges else []
    node_list = list(train_nodes) if needs_nodes else []
    bs = training.batch_size
    best_snapshot = params.copy_values()
    best_ap = -np.inf
    stall = 0

    for epoch in range(training.epochs):
        edge_order = shuffle_rng.permutation(len(edge_list)) if edge_list else np.zeros(0, int)
        node_order = shuffle_rng.permutation(len(node_list)) if node_list else np.zeros(0, int)
        n_steps = max(
            (len(edge_list) + bs - 1) // bs if edge_list else 0,
            (len(node_list) + bs - 1) // bs if node_list else 0,
        )
        epoch_loss = 0.0
        for step in range(n_steps):
            zero_grad(tensors)
            with Tape() as tape:
                parts = []
                if task in ("link", "multitask") and edge_list:
                    idx = edge_order[(step * bs) % len(edge_list):][:bs]
                    if idx.size == 0:
                        idx = edge_order[:bs]
                    batch = [edge_list[i] for i in idx]
                    parts.append(_edge_batch_loss(params, config, graph, batch, sampler_rng))
                if task in ("recommend", "multitask") and node_list:
                    idx = node_order[(step * bs) % len(node_list):][:bs]
                    if idx.size == 0:
                        idx = node_order[:bs]
                    batch = [node_list[i] for i in idx]
                    parts.append(_node_batch_loss(params, config, graph, batch, sampler_rng))
                if task == "multitask":
                    loss = multitask_loss(parts[0], parts[1], mix)
                else:
                    loss = parts[0]
            backward(loss, tape)
            adam_step(tensors, state)
            epoch_loss += loss.item()
        diagnostics.train_losses.append(epoch_loss)

        val_ap = _val_ap(params, config, graph, task, val_edges, val_nodes, eval_seed)
        diagnostics.val_aps.append(val_ap)
        if np.isnan(val_ap):
            continue
        if val_ap > best_ap:
            best_ap = val_ap
            best_snapshot = params.copy_values()
            diagnostics.best_epoch = epoch
            diagnostics.best_val_ap = val_ap
            stall = 0
        else:
            stall += 1
            if stall > training.patience:
                break

    if best_ap > -np.inf:
        params.restore_values(best_snapshot)
    params.check_finite()
    return params, diagnostics
