"""Ranking and margin metrics, error curves, and report containers.

Average precision is uninterpolated: precision at each positive's rank in
the score-sorted list, averaged over positives.  Ties break by ascending
example id so every metric is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

__all__ = [
    "average_precision",
    "margin",
    "MarginRecord",
    "margin_records",
    "margin_distribution",
    "RoundMetrics",
    "MetricsReport",
    "error_curves",
]


def average_precision(scores, labels) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} must be 1-D and equal")
    n_pos = int((labels == 1).sum())
    if n_pos == 0:
        raise ValueError("average_precision needs at least one positive label")
    order = np.lexsort((np.arange(scores.size), -scores))
    ranked = labels[order]
    hits = np.cumsum(ranked == 1)
    ranks = np.arange(1, scores.size + 1)
    precisions = hits[ranked == 1] / ranks[ranked == 1]
    return float(precisions.mean())


def margin(y: float, f: float, tau: float) -> float:
    """(y - tau) * (f - tau): positive iff the thresholded prediction is correct."""
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"score must lie in [0, 1], got {f}")
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y}")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    return (y - tau) * (f - tau)


@dataclass(frozen=True)
class MarginRecord:
    example_id: int
    label: int
    score: float
    tau: float

    @property
    def margin(self) -> float:
        return margin(self.label, self.score, self.tau)


def margin_records(scores, labels, tau: float) -> List[MarginRecord]:
    return [MarginRecord(i, int(y), float(s), tau)
            for i, (s, y) in enumerate(zip(scores, labels))]


def margin_distribution(records: Sequence[MarginRecord], thetas) -> np.ndarray:
    """Cumulative fraction of records with margin <= theta, per grid point."""
    thetas = np.asarray(thetas, dtype=np.float64)
    if thetas.size == 0:
        raise ValueError("margin_distribution needs a non-empty theta grid")
    if not records:
        raise ValueError("margin_distribution needs at least one record")
    margins = np.array([r.margin for r in records])
    return np.array([(margins <= t).mean() for t in thetas])


@dataclass
class RoundMetrics:
    """Metrics of the ensemble truncated after each boosting round."""

    round_index: int
    train_ap: float
    val_ap: float
    test_ap: float
    train_error: float
    test_error: float
    weighted_train_error: float
    train_margin_le_zero: Optional[float] = None
    recommend_train_ap: Optional[float] = None
    recommend_test_ap: Optional[float] = None

    @property
    def generalization_gap(self) -> float:
        return abs(self.test_error - self.train_error)

    def to_dict(self) -> dict:
        out = {
            "round": self.round_index,
            "train_ap": self.train_ap,
            "val_ap": self.val_ap,
            "test_ap": self.test_ap,
            "train_error": self.train_error,
            "test_error": self.test_error,
            "weighted_train_error": self.weighted_train_error,
            "generalization_gap": self.generalization_gap,
        }
        if self.train_margin_le_zero is not None:
            out["train_margin_le_zero"] = self.train_margin_le_zero
        if self.recommend_train_ap is not None:
            out["recommend_train_ap"] = self.recommend_train_ap
            out["recommend_test_ap"] = self.recommend_test_ap
        return out


@dataclass
class MetricsReport:
    rounds: List[RoundMetrics] = field(default_factory=list)
    final_margins: List[MarginRecord] = field(default_factory=list)
    eval_negative_seed: Optional[int] = None
    unseen_node_fraction: Optional[float] = None
    baseline: bool = False
    runtime_seconds: Optional[float] = None
    # Shared-decoder (concatenated-embedding) final metrics, when trained.
    concat_train_ap: Optional[float] = None
    concat_val_ap: Optional[float] = None
    concat_test_ap: Optional[float] = None

    def to_dict(self) -> dict:
        """Serializable payload; timing is deliberately excluded so identical
        seeds produce byte-identical metrics files."""
        out = {
            "rounds": [r.to_dict() for r in self.rounds],
            "margins": [
                {"example_id": r.example_id, "label": r.label,
                 "score": r.score, "tau": r.tau, "margin": r.margin}
                for r in self.final_margins
            ],
            "baseline": self.baseline,
        }
        if self.eval_negative_seed is not None:
            out["eval_negative_seed"] = self.eval_negative_seed
        if self.unseen_node_fraction is not None:
            out["unseen_node_fraction"] = self.unseen_node_fraction
        if self.concat_test_ap is not None:
            out["concat_train_ap"] = self.concat_train_ap
            out["concat_val_ap"] = self.concat_val_ap
            out["concat_test_ap"] = self.concat_test_ap
        return out

    @property
    def final(self) -> RoundMetrics:
        return self.rounds[-1]

    @property
    def final_test_ap(self) -> float:
        """Test AP of the run's final predictor (shared decoder when trained)."""
        if self.concat_test_ap is not None:
            return self.concat_test_ap
        return self.final.test_ap

    def at_k(self, k: int) -> RoundMetrics:
        """Metrics of the ensemble prefix with k learners."""
        for r in self.rounds:
            if r.round_index == k:
                return r
        raise KeyError(f"no round {k} in report with {len(self.rounds)} rounds")


def error_curves(reports: Sequence[MetricsReport]) -> List[dict]:
    """Rows (K, train error, test error, gap) merged across reports.

    Reports must share their data splits; each contributes the metrics of
    its per-round ensemble prefixes, deduplicated by K.
    """
    seeds = {r.eval_negative_seed for r in reports}
    if len(seeds) > 1:
        raise ValueError("error_curves requires reports evaluated on the same split")
    by_k: dict = {}
    for report in reports:
        for rm in report.rounds:
            by_k.setdefault(rm.round_index, rm)
    rows = []
    for k in sorted(by_k):
        rm = by_k[k]
        rows.append({
            "k": k,
            "train_error": rm.train_error,
            "test_error": rm.test_error,
            "gap": rm.generalization_gap,
        })
    return rows
