"""Embedding export, nearest-neighbor rank analysis, and report files.

One embedding table per learner; ranking a center node's neighbors by
distance in each space shows whether spaces order the same neighbors
differently (rank correlation below 1 means they encode different
similarity structure).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .boosting import BoostState
from .graphs import Graph
from .metrics import MetricsReport, error_curves

__all__ = [
    "export_embeddings",
    "neighbor_ranks",
    "spearman_rank_correlation",
    "write_embeddings_csv",
    "write_metrics_json",
    "write_margins_csv",
    "write_error_curves_csv",
]


def export_embeddings(state: BoostState, graph: Graph,
                      nodes: Optional[Sequence[int]] = None) -> List[np.ndarray]:
    """Per-learner embedding tables restricted to the requested nodes."""
    if not state.learners or not state.embeddings:
        raise ValueError("cannot export embeddings from an untrained state")
    idx = np.arange(graph.num_nodes) if nodes is None else np.asarray(nodes, dtype=np.int64)
    return [table[idx].copy() for table in state.embeddings]


def neighbor_ranks(table: np.ndarray, center: int, candidates: Sequence[int]) -> np.ndarray:
    """1-based closeness ranks of candidate nodes around a center, one space.

    Rank 1 is the candidate nearest to the center by euclidean distance in
    this embedding space; ties broken by node id.
    """
    candidates = np.asarray(candidates, dtype=np.int64)
    if candidates.size == 0:
        raise ValueError("need at least one candidate to rank")
    dists = np.linalg.norm(table[candidates] - table[center], axis=1)
    order = np.lexsort((candidates, dists))
    ranks = np.empty(candidates.size, dtype=np.int64)
    ranks[order] = np.arange(1, candidates.size + 1)
    return ranks


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    ranks[order] = np.arange(1, values.size + 1)
    # Average ranks over ties.
    for v in np.unique(values):
        mask = values == v
        if mask.sum() > 1:
            ranks[mask] = ranks[mask].mean()
    return ranks


def spearman_rank_correlation(a, b) -> float:
    """Spearman rho: Pearson correlation of (tie-averaged) ranks."""
    ra = _average_ranks(np.asarray(a, dtype=np.float64))
    rb = _average_ranks(np.asarray(b, dtype=np.float64))
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt((ra * ra).sum() * (rb * rb).sum())
    if denom == 0:
        return 1.0
    return float((ra * rb).sum() / denom)


def _fmt(x: float) -> str:
    return repr(float(x))


def write_embeddings_csv(state: BoostState, graph: Graph, out_dir) -> List[Path]:
    out_dir = Path(out_dir)
    paths = []
    for k, table in enumerate(export_embeddings(state, graph), start=1):
        path = out_dir / f"embeddings_k{k}.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node_id"] + [f"z{j}" for j in range(table.shape[1])])
            for i, row in enumerate(table):
                writer.writerow([i] + [_fmt(v) for v in row])
        paths.append(path)
    return paths


def write_metrics_json(report: MetricsReport, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")
    return path


def write_margins_csv(report: MetricsReport, path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["example_id", "label", "score", "tau", "margin"])
        for rec in report.final_margins:
            writer.writerow([rec.example_id, rec.label, _fmt(rec.score),
                             _fmt(rec.tau), _fmt(rec.margin)])
    return path


def write_error_curves_csv(reports: Sequence[MetricsReport], path) -> Path:
    path = Path(path)
    rows = error_curves(reports)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "train_error", "test_error", "gap"])
        for row in rows:
            writer.writerow([row["k"], _fmt(row["train_error"]),
                             _fmt(row["test_error"]), _fmt(row["gap"])])
    return path
