"""Train/validation/test splitting of observed edges.

Three modes: random transductive, inductive (a held-out node set whose
edges never appear in training), and chronological (all training
timestamps precede validation, which precede test).  Validation and test
positive counts are kept equal up to one example.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .graphs import EdgeExample, Graph

__all__ = ["SplitSpec", "EdgeSplit", "make_split"]

_MODES = ("random_transductive", "inductive", "chronological")


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "random_transductive"
    train_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown split mode {self.mode!r}; valid: {_MODES}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")


@dataclass
class EdgeSplit:
    train: List[EdgeExample]
    validation: List[EdgeExample]
    test: List[EdgeExample]
    spec: SplitSpec
    held_out_nodes: frozenset = frozenset()

    def __iter__(self):
        return iter((self.train, self.validation, self.test))


def _examples(graph: Graph, order) -> List[EdgeExample]:
    return [EdgeExample(int(graph.edge_src[i]), int(graph.edge_dst[i]), 1) for i in order]


def _split_eval_half(pool, rng) -> Tuple[list, list]:
    pool = list(pool)
    n_val = len(pool) // 2
    return pool[:n_val], pool[n_val:]


def _dedupe(examples: List[EdgeExample]) -> List[EdgeExample]:
    seen = set()
    out = []
    for ex in examples:
        key = (min(ex.src, ex.dst), max(ex.src, ex.dst))
        if key not in seen:
            seen.add(key)
            out.append(ex)
    return out


def make_split(graph: Graph, spec: SplitSpec, dedupe_eval: bool = False) -> EdgeSplit:
    """Partition the observed edges into train/validation/test positives.

    ``dedupe_eval`` collapses repeated (src, dst) interaction pairs in the
    validation and test sets, keeping the earliest; the default keeps
    duplicates.
    """
    if graph.num_edges == 0:
        raise ValueError("cannot split an empty graph")
    rng = np.random.default_rng(spec.seed)
    m = graph.num_edges
    n_train = int(round(spec.train_fraction * m))
    n_train = min(max(n_train, 1), m - 2) if m >= 3 else max(n_train, 1)

    if spec.mode == "chronological":
        if not graph.has_timestamps:
            raise ValueError("chronological split requires timestamped edges")
        order = np.argsort(graph.edge_time, kind="stable")
        ts = graph.edge_time[order]
        # Never let equal timestamps straddle a boundary.
        cut1 = n_train
        while 0 < cut1 < m and ts[cut1] == ts[cut1 - 1]:
            cut1 += 1
        rest = m - cut1
        cut2 = cut1 + rest // 2
        while cut1 < cut2 < m and ts[cut2] == ts[cut2 - 1]:
            cut2 += 1
        train = _examples(graph, order[:cut1])
        val = _examples(graph, order[cut1:cut2])
        test = _examples(graph, order[cut2:])
        held_out = frozenset()
    elif spec.mode == "random_transductive":
        order = rng.permutation(m)
        train = _examples(graph, order[:n_train])
        val, test = _split_eval_half(_examples(graph, order[n_train:]), rng)
        held_out = frozenset()
    else:  # inductive
        target_eval = m - n_train
        node_order = rng.permutation(graph.num_nodes)
        touched = np.zeros(graph.num_nodes, dtype=bool)
        eval_mask = np.zeros(m, dtype=bool)
        count = 0
        for node in node_order:
            if count >= target_eval:
                break
            touched[node] = True
            new = (~eval_mask) & ((graph.edge_src == node) | (graph.edge_dst == node))
            count += int(new.sum())
            eval_mask |= new
        train_idx = np.flatnonzero(~eval_mask)
        eval_idx = np.flatnonzero(eval_mask)
        if train_idx.size == 0:
            raise ValueError("inductive split left no training edges; raise train_fraction")
        train = _examples(graph, train_idx)
        eval_pool = _examples(graph, rng.permutation(eval_idx))
        val, test = _split_eval_half(eval_pool, rng)
        held_out = frozenset(int(n) for n in np.flatnonzero(touched))

    if dedupe_eval:
        val, test = _dedupe(val), _dedupe(test)
    return EdgeSplit(train=train, validation=val, test=test, spec=spec, held_out_nodes=held_out)
