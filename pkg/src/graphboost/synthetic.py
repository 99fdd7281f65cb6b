"""Synthetic multi-modal graph generator.

Every node holds a fixed number of latent modes.  Its feature vector is a
concatenation of per-mode blocks: an active block is the mode's centroid
plus per-node noise (the node's "taste" within that mode), an inactive
block is near zero.  Edges form only between nodes that share a mode AND
whose taste blocks for that shared mode are among the most similar pairs
of the mode (above a quantile threshold); qualifying pairs connect with
the intra-mode edge probability and the edge is annotated with its
generating mode.  A configurable fraction of noise edges (annotation -1)
is mixed in.  Node labels are the normalized mode-membership vectors.

The taste condition makes the link task an OR over per-mode similarities:
no single low-dimensional space scores all edges, while one space per
mode does — which is exactly the regime the ensemble is built for.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .graphs import Graph

__all__ = ["SyntheticGraph", "gen_synthetic_multimodal"]


@dataclass
class SyntheticGraph:
    """Generated graph plus its latent ground truth."""

    graph: Graph
    node_modes: List[List[int]]
    edge_modes: List[int]  # generating mode per edge; -1 marks a noise edge
    params: dict = field(default_factory=dict)

    def ground_truth(self) -> dict:
        return {
            "node_modes": [list(m) for m in self.node_modes],
            "edge_generating_mode": list(self.edge_modes),
            "params": dict(self.params),
        }


def gen_synthetic_multimodal(num_nodes: int, num_modes: int, feature_dim_per_mode: int,
                             modes_per_node: int, intra_mode_edge_prob: float,
                             noise_edge_prob: float, seed: int,
                             taste_quantile: float = 0.5,
                             feature_noise: float = 0.3,
                             inactive_noise: float = 0.05,
                             centroid_scale: float = 1.0,
                             normalize_features: bool = False) -> SyntheticGraph:
    """Generate a graph whose edges are explained by per-mode taste similarity.

    ``noise_edge_prob`` is the target fraction of noise edges in the final
    edge list (mode-free random pairs).  ``taste_quantile`` is the per-mode
    similarity quantile a pair must clear before it can link through that
    mode; 0 disables the taste condition.  ``centroid_scale`` against
    ``feature_noise`` controls how much of the block signal is shared mode
    identity versus per-node taste; ``normalize_features`` rescales feature
    rows to unit norm, which keeps decoder dot products in the responsive
    range of the sigmoid.
    """
    if num_modes < 1:
        raise ValueError(f"num_modes must be >= 1, got {num_modes}")
    if not 1 <= modes_per_node <= num_modes:
        raise ValueError(
            f"modes_per_node must lie in [1, num_modes], got {modes_per_node}")
    if num_nodes < 2:
        raise ValueError(f"num_nodes must be >= 2, got {num_nodes}")
    if not 0.0 <= intra_mode_edge_prob <= 1.0:
        raise ValueError(f"intra_mode_edge_prob must lie in [0, 1], got {intra_mode_edge_prob}")
    if not 0.0 <= noise_edge_prob < 1.0:
        raise ValueError(f"noise_edge_prob must lie in [0, 1), got {noise_edge_prob}")
    if not 0.0 <= taste_quantile < 1.0:
        raise ValueError(f"taste_quantile must lie in [0, 1), got {taste_quantile}")

    rng = np.random.default_rng(seed)
    d = feature_dim_per_mode

    # Latent memberships: modes_per_node distinct modes per node.
    membership = np.zeros((num_nodes, num_modes), dtype=bool)
    node_modes: List[List[int]] = []
    for i in range(num_nodes):
        modes = rng.choice(num_modes, size=modes_per_node, replace=False)
        modes = sorted(int(m) for m in modes)
        node_modes.append(modes)
        membership[i, modes] = True

    centroids = centroid_scale * rng.normal(size=(num_modes, d))
    features = inactive_noise * rng.normal(size=(num_nodes, num_modes * d))
    for k in range(num_modes):
        members = np.flatnonzero(membership[:, k])
        block = centroids[k] + feature_noise * rng.normal(size=(members.size, d))
        features[members, k * d:(k + 1) * d] = block

    # Signal edges, one mode at a time; a pair linking through several
    # modes keeps the lowest generating mode.
    edge_mode: dict = {}
    for k in range(num_modes):
        members = np.flatnonzero(membership[:, k])
        if members.size < 2:
            continue
        block = features[members, k * d:(k + 1) * d]
        centered = block - centroids[k]
        norms = np.linalg.norm(centered, axis=1)
        norms[norms == 0] = 1.0
        unit = centered / norms[:, None]
        sims = unit @ unit.T
        iu, ju = np.triu_indices(members.size, k=1)
        pair_sims = sims[iu, ju]
        threshold = np.quantile(pair_sims, taste_quantile) if taste_quantile > 0 else -np.inf
        eligible = pair_sims >= threshold
        hit = eligible & (rng.random(pair_sims.size) < intra_mode_edge_prob)
        for a, b in zip(members[iu[hit]].tolist(), members[ju[hit]].tolist()):
            key = (min(a, b), max(a, b))
            if key not in edge_mode:
                edge_mode[key] = k

    pairs = sorted(edge_mode)
    edge_modes = [edge_mode[p] for p in pairs]

    # Noise edges: random pairs regardless of structure, targeting the
    # requested fraction of the final edge list.
    if noise_edge_prob > 0 and pairs:
        target = int(round(noise_edge_prob / (1.0 - noise_edge_prob) * len(pairs)))
        existing = set(pairs)
        noise_pairs = []
        budget = max(1000, 100 * target)
        attempts = 0
        while len(noise_pairs) < target and attempts < budget:
            u = int(rng.integers(0, num_nodes))
            v = int(rng.integers(0, num_nodes))
            attempts += 1
            if u == v:
                continue
            key = (min(u, v), max(u, v))
            if key in existing:
                continue
            existing.add(key)
            noise_pairs.append(key)
        pairs = pairs + noise_pairs
        edge_modes = edge_modes + [-1] * len(noise_pairs)

    labels = membership.astype(np.float64) / modes_per_node
    if normalize_features:
        norms = np.linalg.norm(features, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        features = features / norms
    graph = Graph(num_nodes, pairs, node_features=features, node_labels=labels)
    params = {
        "num_nodes": num_nodes,
        "num_modes": num_modes,
        "feature_dim_per_mode": feature_dim_per_mode,
        "modes_per_node": modes_per_node,
        "intra_mode_edge_prob": intra_mode_edge_prob,
        "noise_edge_prob": noise_edge_prob,
        "taste_quantile": taste_quantile,
        "feature_noise": feature_noise,
        "inactive_noise": inactive_noise,
        "centroid_scale": centroid_scale,
        "normalize_features": normalize_features,
        "seed": seed,
    }
    return SyntheticGraph(graph=graph, node_modes=node_modes, edge_modes=edge_modes, params=params)
