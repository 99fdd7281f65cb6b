"""Negative sampling and neighborhood sampling.

Both are pure functions of their inputs and a seed.
"""

from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

from .graphs import EdgeExample, Graph, NeighborhoodSample

__all__ = ["sample_negatives", "sample_neighbors", "sample_neighbor_lists"]


def sample_negatives(graph: Graph, positives: Sequence[EdgeExample], seed: int,
                     count: Optional[int] = None) -> List[EdgeExample]:
    """Draw label-0 node pairs absent from the observed edge set.

    Returns exactly as many examples as there are positives (matching the
    equal-negatives convention) unless ``count`` overrides it.
    """
    if graph.num_nodes < 2:
        raise ValueError("negative sampling needs at least 2 nodes")
    n = len(positives) if count is None else int(count)
    observed = graph.observed_pairs()
    rng = np.random.default_rng(seed)
    out: List[EdgeExample] = []
    budget = max(1000, 50 * n)
    attempts = 0
    while len(out) < n:
        take = max(64, 2 * (n - len(out)))
        if attempts + take > budget:
            take = budget - attempts
            if take <= 0:
                raise ValueError(
                    f"negative sampling exhausted its budget of {budget} attempts "
                    f"after finding {len(out)}/{n} non-edges (graph too dense)")
        u = rng.integers(0, graph.num_nodes, size=take)
        v = rng.integers(0, graph.num_nodes, size=take)
        attempts += take
        for a, b in zip(u.tolist(), v.tolist()):
            if a == b:
                continue
            if (min(a, b), max(a, b)) in observed:
                continue
            out.append(EdgeExample(a, b, 0, origin="negative_sample"))
            if len(out) == n:
                break
    return out


def _neighbor_pool(graph: Graph, center: int, time_cutoff: Optional[float]) -> np.ndarray:
    return graph.neighbors(center, time_cutoff=time_cutoff)


def sample_neighbors(graph: Graph, center: int, sample_size: int,
                     time_cutoff: Optional[float] = None, seed: int = 0,
                     pad: bool = False) -> NeighborhoodSample:
    """Sample up to ``sample_size`` distinct neighbors of ``center``.

    Degree below ``sample_size``: all neighbors are returned, filled up to
    ``sample_size`` with replacement when ``pad`` is set.  An isolated node
    yields an empty (flagged) sample.
    """
    pool = _neighbor_pool(graph, center, time_cutoff)
    rng = np.random.default_rng(seed)
    if pool.size == 0:
        chosen: list = []
    elif pool.size <= sample_size:
        chosen = pool.tolist()
        if pad and pool.size < sample_size:
            extra = rng.choice(pool, size=sample_size - pool.size, replace=True)
            chosen = chosen + extra.tolist()
    else:
        chosen = rng.choice(pool, size=sample_size, replace=False).tolist()
    return NeighborhoodSample(center=int(center), neighbor_ids=[int(x) for x in chosen])


def sample_neighbor_lists(graph: Graph, centers: Sequence[int], sample_size: int,
                          rng: np.random.Generator,
                          time_cutoffs: Optional[Sequence[float]] = None) -> List[np.ndarray]:
    """Batch variant sharing one generator; used by the training loop.

    Without-replacement subsets are drawn for the whole batch in one pass:
    every neighbor slot gets a random key and each center keeps its
    ``sample_size`` smallest keys, which is distributionally a uniform
    subset and avoids per-center generator calls.
    """
    pools = []
    over = False
    for i, center in enumerate(centers):
        cutoff = None if time_cutoffs is None else time_cutoffs[i]
        pool = _neighbor_pool(graph, int(center), cutoff)
        over = over or pool.size > sample_size
        pools.append(pool)
    if not over:
        return pools
    lengths = np.array([p.size for p in pools], dtype=np.int64)
    flat = np.concatenate([p for p in pools if p.size]) if lengths.sum() else np.zeros(0, np.int64)
    seg = np.repeat(np.arange(len(pools)), lengths)
    keys = rng.random(flat.size)
    order = np.lexsort((keys, seg))
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    pos_in_seg = np.arange(flat.size) - starts[seg]
    keep = pos_in_seg < sample_size
    kept = flat[order][keep]
    kept_lengths = np.minimum(lengths, sample_size)
    bounds = np.cumsum(kept_lengths)[:-1]
    return np.split(kept, bounds)
