"""Boosting meta-learner over weak graph encoders.

Each round fits one encoder/decoder on the current example weights, scores
the training set, reweights it (SAMME.R exponential update or AdaBoost.R2
beta update with bootstrap), and checks the stopping rules.  Every retained
learner owns one embedding space; ensemble predictions are convex
combinations of per-learner outputs.  Positive-example weights persist
across rounds; negatives are redrawn every round and re-enter at the mean
negative weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .decoders import decode_mlp_node, decode_mlp_pairwise, decode_node, decode_pairwise
from .encoder import EncoderConfig, WeakLearnerParams, node_embeddings
from .graphs import EdgeExample, Graph, NodeExample
from .losses import link_loss
from .metrics import MarginRecord, MetricsReport, RoundMetrics, average_precision, margin_records
from .optim import AdamState, adam_step
from .sampling import sample_negatives
from .splits import EdgeSplit
from .tensor import PROB_FLOOR, Tape, backward, constant, parameter, zero_grad
from .training import TrainingConfig, fit_weak_learner, micro_ap, node_distributions, pairwise_scores

__all__ = [
    "BoostConfig",
    "BoostState",
    "WeakLearningViolation",
    "init_weights",
    "samme_r_update",
    "samme_r_update_distribution",
    "adaboost_r2_round",
    "R2Round",
    "clip_weights",
    "should_stop",
    "combine_pairwise",
    "combine_node",
    "ensemble_edge_scores",
    "ensemble_node_distributions",
    "concat_embeddings",
    "fit_concat_decoder",
    "concat_nn_predict",
    "train_boosted",
]

_ALGORITHMS = ("samme_r", "adaboost_r2", "concat_nn")


class WeakLearningViolation(ValueError):
    """Raised when an AdaBoost.R2 round's average loss reaches 1/2."""


@dataclass(frozen=True)
class BoostConfig:
    max_learners: int = 5
    boost_learning_rate: float = 1.0
    algorithm: str = "samme_r"
    tau: float = 0.5
    require_progress: bool = True
    # 'auto' resolves to per-learner scores for single-task runs and to the
    # combined ensemble error for multi-task runs.
    weight_update_source: str = "auto"
    weight_cap: float = 0.5

    def __post_init__(self):
        if self.max_learners < 1:
            raise ValueError(f"max_learners must be >= 1, got {self.max_learners}")
        if self.boost_learning_rate <= 0:
            raise ValueError(f"boost_learning_rate must be positive, got {self.boost_learning_rate}")
        if self.algorithm not in _ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; valid: {_ALGORITHMS}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.weight_update_source not in ("auto", "per_learner", "combined"):
            raise ValueError(f"invalid weight_update_source {self.weight_update_source!r}")
        if not 0.0 < self.weight_cap <= 1.0:
            raise ValueError(f"weight_cap must lie in (0, 1], got {self.weight_cap}")


@dataclass
class BoostState:
    """Mutable state of a boosting run."""

    config: BoostConfig
    encoder_config: EncoderConfig
    training_config: TrainingConfig
    seed: int
    task: str = "link"
    learners: List[WeakLearnerParams] = field(default_factory=list)
    round_errors: List[float] = field(default_factory=list)
    positive_weights: Optional[np.ndarray] = None
    mean_negative_weight: float = 0.0
    node_weights: Optional[np.ndarray] = None
    stopped: bool = False
    stop_reason: Optional[str] = None
    concat_decoder: Optional[Dict] = None
    embeddings: List[np.ndarray] = field(default_factory=list)  # one table per learner
    weight_diagnostics: List[dict] = field(default_factory=list)
    # Pending bootstrap sample for the next AdaBoost.R2 round (resume support).
    r2_bootstrap: Optional[np.ndarray] = None

    @property
    def num_learners(self) -> int:
        return len(self.learners)

    def alphas(self) -> np.ndarray:
        """Normalized combination coefficients over retained learners."""
        if not self.learners:
            raise ValueError("no learners trained yet")
        raw = np.array([w.alpha for w in self.learners], dtype=np.float64)
        total = raw.sum()
        if total <= 0:
            return np.full(len(self.learners), 1.0 / len(self.learners))
        return raw / total


# ---------------------------------------------------------------------------
# Weight updates
# ---------------------------------------------------------------------------

def init_weights(n: int) -> np.ndarray:
    """Uniform starting weights 1/n."""
    if n < 1:
        raise ValueError(f"need at least one example, got {n}")
    return np.full(n, 1.0 / n)


def _clamp01(s: np.ndarray) -> np.ndarray:
    return np.clip(s, PROB_FLOOR, 1.0 - PROB_FLOOR)


def samme_r_update(weights, labels, scores, boost_lr: float) -> np.ndarray:
    """Exponential reweighting from real-valued scores, renormalized.

    For the two-class edge task the coded-label product reads as the signed
    log-odds: log s - log(1-s) for label 1 and its negation for label 0.
    Each weight is multiplied by exp(-(1/2) * lr * coded) and the vector is
    renormalized to the simplex.
    """
    w = np.asarray(weights, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if w.shape != y.shape or y.shape != s.shape:
        raise ValueError(
            f"samme_r_update: weights {w.shape}, labels {y.shape}, scores {s.shape} must align")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("samme_r_update: labels must be binary")
    s = _clamp01(s)
    log_odds = np.log(s) - np.log(1.0 - s)
    coded = np.where(y == 1.0, log_odds, -log_odds)
    out = w * np.exp(-0.5 * boost_lr * coded)
    total = out.sum()
    if total <= 0 or not np.isfinite(total):
        raise ValueError("samme_r_update: degenerate weight vector after update")
    return out / total


def samme_r_update_distribution(weights, label_matrix, dist_matrix, boost_lr: float) -> np.ndarray:
    """Vector-label variant: multiplier exp(-(1/2) * lr * sum_c y_c log r_c).

    The inner product of a normalized label row with log-probabilities is
    the (negative) cross entropy, so poorly predicted rows grow fastest.
    """
    w = np.asarray(weights, dtype=np.float64)
    y = np.asarray(label_matrix, dtype=np.float64)
    r = _clamp01(np.asarray(dist_matrix, dtype=np.float64))
    if w.shape[0] != y.shape[0] or y.shape != r.shape:
        raise ValueError("samme_r_update_distribution: shapes must align")
    coded = (y * np.log(r)).sum(axis=1)
    out = w * np.exp(-0.5 * boost_lr * coded)
    return out / out.sum()


@dataclass
class R2Round:
    weights: np.ndarray
    coefficient: float
    bootstrap_indices: Optional[np.ndarray]
    status: str  # "ok" or "perfect"
    average_loss: float


def adaboost_r2_round(weights, labels, scores, seed: int = 0) -> R2Round:
    """One AdaBoost.R2 round: linear per-example losses, beta update, bootstrap.

    Average loss at or beyond 1/2 violates the weak-learning condition and
    raises; zero average loss reports a perfect learner (boosting stops).
    Scores already live in [0, 1], so the per-example losses |y - s| are
    used directly against the maximal error of 1.
    """
    w = np.asarray(weights, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if w.shape != y.shape or y.shape != s.shape:
        raise ValueError(
            f"adaboost_r2_round: weights {w.shape}, labels {y.shape}, scores {s.shape} must align")
    if s.min() < 0.0 or s.max() > 1.0:
        raise ValueError("adaboost_r2_round: scores must lie in [0, 1]")
    loss = np.abs(y - s)
    avg = float((w * loss).sum())
    if avg == 0.0:
        return R2Round(weights=w.copy(), coefficient=float(np.log(1.0 / PROB_FLOOR)),
                       bootstrap_indices=None, status="perfect", average_loss=0.0)
    if avg >= 0.5:
        raise WeakLearningViolation(
            f"average loss {avg:.4f} >= 0.5 violates the weak-learning condition")
    beta = avg / (1.0 - avg)
    out = w * np.power(beta, 1.0 - loss)
    out = out / out.sum()
    rng = np.random.default_rng(seed)
    bootstrap = rng.choice(w.size, size=w.size, replace=True, p=out)
    return R2Round(weights=out, coefficient=float(np.log(1.0 / beta)),
                   bootstrap_indices=bootstrap, status="ok", average_loss=avg)


def clip_weights(weights: np.ndarray, cap: float = 0.5) -> np.ndarray:
    """Cap any single weight, redistributing the excess proportionally.

    Infeasible caps (cap * n < 1) leave the vector unchanged apart from
    renormalization.
    """
    w = np.asarray(weights, dtype=np.float64).copy()
    w /= w.sum()
    if cap * w.size < 1.0 or w.size == 1:
        return w
    for _ in range(w.size):
        over = w > cap
        if not over.any():
            break
        excess = (w[over] - cap).sum()
        w[over] = cap
        rest = ~over
        w[rest] += excess * w[rest] / w[rest].sum()
    return w / w.sum()


def should_stop(num_learners: int, max_learners: int,
                current_misclassified: set,
                previous_misclassified: Optional[set],
                require_progress: bool = True) -> Tuple[bool, Optional[str]]:
    """Stopping rules, checked in order: perfect fit, no progress, budget."""
    if len(current_misclassified) == 0:
        return True, "perfect fit"
    if require_progress and previous_misclassified is not None:
        fixed = previous_misclassified - current_misclassified
        if not fixed:
            return True, "no progress"
    if num_learners >= max_learners:
        return True, "budget"
    return False, None


# ---------------------------------------------------------------------------
# Ensemble combination
# ---------------------------------------------------------------------------

def ensemble_edge_scores(per_learner_scores: Sequence[np.ndarray], alphas: np.ndarray) -> np.ndarray:
    """Convex combination of per-learner similarity scores."""
    stacked = np.stack(per_learner_scores)
    return np.einsum("k,ke->e", alphas, stacked)


def ensemble_node_distributions(per_learner_dists: Sequence[np.ndarray], alphas: np.ndarray) -> np.ndarray:
    stacked = np.stack(per_learner_dists)
    return np.einsum("k,kij->ij", alphas, stacked)


def combine_pairwise(learners: Sequence[WeakLearnerParams], encoder_config: EncoderConfig,
                     graph: Graph, pair: Tuple[int, int], seed: int = 0) -> float:
    """Ensemble similarity for one node pair: sum_k alpha_k s_k in [0, 1]."""
    if not learners:
        raise ValueError("combine_pairwise: no learners")
    raw = np.array([w.alpha for w in learners], dtype=np.float64)
    alphas = raw / raw.sum() if raw.sum() > 0 else np.full(len(learners), 1.0 / len(learners))
    i, j = pair
    score = 0.0
    for a, learner in zip(alphas, learners):
        z = node_embeddings(learner, encoder_config, graph, nodes=[i, j], seed=seed)
        s = decode_pairwise(constant(z[:1]), constant(z[1:])).item()
        score += a * s
    return float(score)


def combine_node(learners: Sequence[WeakLearnerParams], encoder_config: EncoderConfig,
                 graph: Graph, node: int, seed: int = 0) -> np.ndarray:
    """Ensemble label distribution for one node."""
    if not learners:
        raise ValueError("combine_node: no learners")
    raw = np.array([w.alpha for w in learners], dtype=np.float64)
    alphas = raw / raw.sum() if raw.sum() > 0 else np.full(len(learners), 1.0 / len(learners))
    out = None
    for a, learner in zip(alphas, learners):
        z = node_embeddings(learner, encoder_config, graph, nodes=[node], seed=seed,
                            include_self=encoder_config.include_self_in_node_task)
        r = decode_node(constant(z), learner.decoder).values[0]
        out = a * r if out is None else out + a * r
    return out


# ---------------------------------------------------------------------------
# Concatenated-embedding variant (shared nonlinear decoder)
# ---------------------------------------------------------------------------

def concat_embeddings(state: BoostState, k: Optional[int] = None) -> np.ndarray:
    """Concatenate the cached per-learner embedding tables (first k learners)."""
    if not state.embeddings:
        raise ValueError("state has no cached embeddings")
    tables = state.embeddings if k is None else state.embeddings[:k]
    return np.concatenate(tables, axis=1)


def fit_concat_decoder(state: BoostState, graph: Graph,
                       train_edges: Sequence[EdgeExample],
                       val_edges: Sequence[EdgeExample],
                       seed: int, hidden: Optional[int] = None,
                       epochs: int = 200, patience: int = 20,
                       learning_rate: float = 1e-2) -> Dict:
    """Train the shared pairwise decoder on frozen concatenated embeddings.

    Encoders never move; only the decoder's four tensors are optimized, so
    full-batch Adam on the cached embedding table is cheap.
    """
    zcat = concat_embeddings(state)
    dim = zcat.shape[1]
    hidden = hidden or max(dim // 2, 8)
    rng = np.random.default_rng(seed)
    a1 = np.sqrt(6.0 / (dim + hidden))
    a2 = np.sqrt(6.0 / (hidden + 1))
    decoder = {
        "w1": parameter(rng.uniform(-a1, a1, size=(dim, hidden))),
        "b1": parameter(np.zeros((1, hidden))),
        "w2": parameter(rng.uniform(-a2, a2, size=(hidden, 1))),
        "b2": parameter(np.zeros((1, 1))),
    }
    tensors = list(decoder.values())
    state_adam = AdamState.for_params(tensors, learning_rate=learning_rate)
    src = np.array([e.src for e in train_edges])
    dst = np.array([e.dst for e in train_edges])
    labels = [e.label for e in train_edges]
    weights = [1.0 / len(train_edges)] * len(train_edges)
    zi, zj = constant(zcat[src]), constant(zcat[dst])
    val_labels = np.array([e.label for e in val_edges]) if val_edges else None

    best = {name: t.values.copy() for name, t in decoder.items()}
    best_ap = -np.inf
    stall = 0
    for _ in range(epochs):
        zero_grad(tensors)
        with Tape() as tape:
            loss = link_loss(decode_mlp_pairwise(zi, zj, decoder), labels, weights)
        backward(loss, tape)
        adam_step(tensors, state_adam)
        if val_labels is None:
            continue
        vs = np.array([e.src for e in val_edges])
        vd = np.array([e.dst for e in val_edges])
        scores = decode_mlp_pairwise(constant(zcat[vs]), constant(zcat[vd]), decoder).values[:, 0]
        ap = average_precision(scores, val_labels)
        if ap > best_ap:
            best_ap = ap
            best = {name: t.values.copy() for name, t in decoder.items()}
            stall = 0
        else:
            stall += 1
            if stall > patience:
                break
    for name, t in decoder.items():
        t.values[...] = best[name]
    return decoder


def concat_nn_predict(state: BoostState, examples=None, nodes=None) -> np.ndarray:
    """Score edge examples (or decode node distributions) with the shared decoder."""
    if state.concat_decoder is None:
        raise ValueError("concat decoder has not been trained")
    zcat = concat_embeddings(state)
    if examples is not None:
        src = np.array([e.src for e in examples])
        dst = np.array([e.dst for e in examples])
        out = decode_mlp_pairwise(constant(zcat[src]), constant(zcat[dst]),
                                  state.concat_decoder)
        return out.values[:, 0]
    if nodes is not None:
        return decode_mlp_node(constant(zcat[np.asarray(nodes)]), state.concat_decoder).values
    raise ValueError("pass either examples or nodes")


# ---------------------------------------------------------------------------
# The boosting loop
# ---------------------------------------------------------------------------

def _derived_seed(master: int, tag: int, k: int = 0) -> int:
    return int(np.random.default_rng([master, tag, k]).integers(2**63))


_TAG_NEG_ROUND = 1
_TAG_NEG_TRAIN_EVAL = 2
_TAG_NEG_VAL = 3
_TAG_NEG_TEST = 4
_TAG_FIT = 5
_TAG_EMBED = 6
_TAG_NODES = 7
_TAG_R2 = 8
_TAG_CONCAT = 9


def _with_weights(examples: Sequence[EdgeExample], weights: np.ndarray) -> List[EdgeExample]:
    return [EdgeExample(e.src, e.dst, e.label, float(w), e.origin)
            for e, w in zip(examples, weights)]


def _edge_labels(examples: Sequence[EdgeExample]) -> np.ndarray:
    return np.array([e.label for e in examples], dtype=np.float64)


def _split_nodes(graph: Graph, seed: int, train_fraction: float):
    """Node-level train/val/test split for the recommendation task."""
    if graph.node_labels is None:
        raise ValueError("recommendation task requires node labels on the graph")
    rng = np.random.default_rng(seed)
    order = rng.permutation(graph.num_nodes)
    n_train = max(1, int(round(train_fraction * graph.num_nodes)))
    rest = graph.num_nodes - n_train
    n_val = rest // 2
    mk = lambda ids: [NodeExample(int(i), tuple(graph.node_labels[i]), 1.0) for i in ids]
    return mk(order[:n_train]), mk(order[n_train:n_train + n_val]), mk(order[n_train + n_val:])


def train_boosted(graph: Graph, split: EdgeSplit, encoder_config: EncoderConfig,
                  boost_config: BoostConfig, training_config: TrainingConfig,
                  seed: int, task: str = "link", mix: float = 0.5,
                  resume_state: Optional[BoostState] = None) -> Tuple[BoostState, MetricsReport]:
    """Run the full boosting loop and report per-round ensemble metrics.

    Per round: fit a weak learner on the weighted examples, cache its
    embedding table, update the example weights (per algorithm), renormalize
    and cap them, then evaluate the ensemble prefix on the fixed train/
    validation/test sets and check the stopping rules.  Ensemble metrics at
    round k are exactly the metrics of a budget-k run (prefix property).
    """
    if graph.node_features is None:
        raise ValueError("graph has no node features attached")
    if task not in ("link", "recommend", "multitask"):
        raise ValueError(f"unknown task {task!r}")
    needs_edges = task in ("link", "multitask")
    needs_nodes = task in ("recommend", "multitask")
    cfg = boost_config
    update_source = cfg.weight_update_source
    if update_source == "auto":
        update_source = "combined" if task == "multitask" else "per_learner"

    train_pos = list(split.train)
    # Fixed, seeded negative sets make per-round metrics comparable.
    eval_neg_seed = _derived_seed(seed, _TAG_NEG_TEST)
    if needs_edges:
        train_eval = train_pos + sample_negatives(
            graph, train_pos, seed=_derived_seed(seed, _TAG_NEG_TRAIN_EVAL))
        val_eval = list(split.validation) + sample_negatives(
            graph, split.validation, seed=_derived_seed(seed, _TAG_NEG_VAL))
        test_eval = list(split.test) + sample_negatives(graph, split.test, seed=eval_neg_seed)
        y_train, y_val, y_test = map(_edge_labels, (train_eval, val_eval, test_eval))
    else:
        train_eval = val_eval = test_eval = []
        y_train = y_val = y_test = None
    if cfg.algorithm == "adaboost_r2" and task != "link":
        raise ValueError("adaboost_r2 is implemented for the link task only")
    node_train = node_val = node_test = []
    if needs_nodes:
        node_train, node_val, node_test = _split_nodes(
            graph, _derived_seed(seed, _TAG_NODES), split.spec.train_fraction)

    state = resume_state
    if state is None:
        state = BoostState(config=cfg, encoder_config=encoder_config,
                           training_config=training_config, seed=seed, task=task)
    report = MetricsReport(eval_negative_seed=eval_neg_seed,
                           baseline=cfg.max_learners == 1)
    if split.held_out_nodes:
        touched = {e.src for e in split.test} | {e.dst for e in split.test}
        unseen = touched & split.held_out_nodes
        report.unseen_node_fraction = len(unseen) / max(len(touched), 1)

    # Per-learner score caches over the fixed evaluation sets.
    learner_train_scores: List[np.ndarray] = []
    learner_val_scores: List[np.ndarray] = []
    learner_test_scores: List[np.ndarray] = []
    learner_node_dists: List[np.ndarray] = []
    for params, table in zip(state.learners, state.embeddings):
        if needs_edges:
            learner_train_scores.append(pairwise_scores(table, train_eval))
            learner_val_scores.append(pairwise_scores(table, val_eval))
            learner_test_scores.append(pairwise_scores(table, test_eval))
        if needs_nodes:
            zn = node_embeddings(params, encoder_config, graph,
                                 seed=_derived_seed(seed, _TAG_EMBED, len(learner_node_dists)),
                                 include_self=encoder_config.include_self_in_node_task)
            learner_node_dists.append(node_distributions(params, zn))

    prev_misclassified: Optional[set] = None

    def rebuild_round_metrics():
        """Recompute the running report for resumed states."""
        for k in range(1, state.num_learners + 1):
            report.rounds.append(_prefix_metrics(k))

    def _prefix_metrics(k: int) -> RoundMetrics:
        alphas = state.alphas()[:k]
        alphas = alphas / alphas.sum()
        rm_kwargs = dict(round_index=k, weighted_train_error=state.round_errors[k - 1])
        if needs_edges:
            s_train = ensemble_edge_scores(learner_train_scores[:k], alphas)
            s_val = ensemble_edge_scores(learner_val_scores[:k], alphas)
            s_test = ensemble_edge_scores(learner_test_scores[:k], alphas)
            margins = (y_train - cfg.tau) * (s_train - cfg.tau)
            rm_kwargs.update(
                train_ap=average_precision(s_train, y_train),
                val_ap=average_precision(s_val, y_val),
                test_ap=average_precision(s_test, y_test),
                train_error=float(((s_train > cfg.tau) != (y_train == 1)).mean()),
                test_error=float(((s_test > cfg.tau) != (y_test == 1)).mean()),
                train_margin_le_zero=float((margins <= 0).mean()),
            )
        if needs_nodes:
            r = ensemble_node_distributions(learner_node_dists[:k], alphas)
            rec_train = micro_ap(r, node_train)
            rec_test = micro_ap(r, node_test)
            rm_kwargs.update(recommend_train_ap=rec_train, recommend_test_ap=rec_test)
            if not needs_edges:
                err_train = _node_error(r, node_train)
                err_test = _node_error(r, node_test)
                rm_kwargs.update(train_ap=rec_train, val_ap=micro_ap(r, node_val),
                                 test_ap=rec_test, train_error=err_train, test_error=err_test)
        return RoundMetrics(**rm_kwargs)

    def _node_error(dists: np.ndarray, examples: Sequence[NodeExample]) -> float:
        wrong = 0
        for ex in examples:
            pred = int(np.argmax(dists[ex.node]))
            if np.asarray(ex.label_vector)[pred] <= 0:
                wrong += 1
        return wrong / max(len(examples), 1)

    def _misclassified_set(k: int) -> set:
        alphas = state.alphas()[:k]
        alphas = alphas / alphas.sum()
        bad: set = set()
        if needs_edges:
            s = ensemble_edge_scores(learner_train_scores[:k], alphas)
            bad |= {("e", i) for i in np.flatnonzero((s > cfg.tau) != (y_train == 1))}
        if needs_nodes:
            r = ensemble_node_distributions(learner_node_dists[:k], alphas)
            for i, ex in enumerate(node_train):
                if np.asarray(ex.label_vector)[int(np.argmax(r[ex.node]))] <= 0:
                    bad.add(("n", i))
        return bad

    if resume_state is not None:
        state.config = cfg
        if (state.stopped and state.stop_reason == "budget"
                and cfg.max_learners > state.num_learners):
            state.stopped, state.stop_reason = False, None
        if state.num_learners:
            rebuild_round_metrics()
            prev_misclassified = _misclassified_set(state.num_learners)
        if state.stopped:
            if needs_edges and state.num_learners:
                report.final_margins = _final_margins(state, learner_train_scores,
                                                      y_train, cfg.tau)
                if state.concat_decoder is not None:
                    report.concat_train_ap = average_precision(
                        concat_nn_predict(state, examples=train_eval), y_train)
                    report.concat_val_ap = average_precision(
                        concat_nn_predict(state, examples=val_eval), y_val)
                    report.concat_test_ap = average_precision(
                        concat_nn_predict(state, examples=test_eval), y_test)
            return state, report

    start_round = state.num_learners
    for k in range(start_round, cfg.max_learners):
        # Assemble this round's weighted training examples.
        if needs_edges:
            round_negs = sample_negatives(graph, train_pos,
                                          seed=_derived_seed(seed, _TAG_NEG_ROUND, k))
            n_pos, n_neg = len(train_pos), len(round_negs)
            if state.positive_weights is None:
                w_edges = init_weights(n_pos + n_neg)
            else:
                w_edges = np.concatenate([
                    state.positive_weights,
                    np.full(n_neg, state.mean_negative_weight),
                ])
                w_edges = clip_weights(w_edges, cfg.weight_cap)
            round_examples = _with_weights(train_pos + round_negs, w_edges)
            if cfg.algorithm == "adaboost_r2" and state.r2_bootstrap is not None:
                sampled = [round_examples[i] for i in state.r2_bootstrap]
                fit_edges = [EdgeExample(e.src, e.dst, e.label, 1.0 / len(sampled), e.origin)
                             for e in sampled]
            else:
                fit_edges = round_examples
        else:
            round_examples, fit_edges = [], []
            w_edges = None
        if needs_nodes:
            if state.node_weights is None:
                state.node_weights = init_weights(len(node_train))
            fit_nodes = [NodeExample(ex.node, ex.label_vector, float(w))
                         for ex, w in zip(node_train, state.node_weights)]
        else:
            fit_nodes = None

        params, _ = fit_weak_learner(
            graph, fit_edges, val_eval, encoder_config, training_config,
            seed=_derived_seed(seed, _TAG_FIT, k), task=task,
            train_nodes=fit_nodes, val_nodes=node_val or None, mix=mix)

        table = node_embeddings(params, encoder_config, graph,
                                seed=_derived_seed(seed, _TAG_EMBED, k))
        if needs_edges:
            cand_train = pairwise_scores(table, train_eval)
            cand_val = pairwise_scores(table, val_eval)
            cand_test = pairwise_scores(table, test_eval)
        if needs_nodes:
            zn = node_embeddings(params, encoder_config, graph,
                                 seed=_derived_seed(seed, _TAG_EMBED, k),
                                 include_self=encoder_config.include_self_in_node_task)
            cand_dists = node_distributions(params, zn)

        # Weighted error of this learner on its round examples.
        if needs_edges:
            s_round = pairwise_scores(table, round_examples)
            y_round = _edge_labels(round_examples)
            eps = float((w_edges * ((s_round > cfg.tau) != (y_round == 1))).sum())
        else:
            preds = np.argmax(cand_dists[[ex.node for ex in node_train]], axis=1)
            wrong = np.array([np.asarray(ex.label_vector)[p] <= 0
                              for ex, p in zip(node_train, preds)])
            eps = float((state.node_weights * wrong).sum())

        # Tentatively retain the learner, then update weights & check rules.
        if cfg.algorithm == "adaboost_r2":
            try:
                r2 = adaboost_r2_round(w_edges, y_round, s_round,
                                       seed=_derived_seed(seed, _TAG_R2, k))
            except WeakLearningViolation as exc:
                state.stopped, state.stop_reason = True, f"weak-learning violation: {exc}"
                break
            params.alpha = r2.coefficient
            new_w = r2.weights
            state.r2_bootstrap = r2.bootstrap_indices
            r2_perfect = r2.status == "perfect"
        else:
            params.alpha = 1.0  # uniform convex combination for SAMME.R
            r2_perfect = False

        state.learners.append(params)
        state.embeddings.append(table)
        state.round_errors.append(eps)
        if needs_edges:
            learner_train_scores.append(cand_train)
            learner_val_scores.append(cand_val)
            learner_test_scores.append(cand_test)
        if needs_nodes:
            learner_node_dists.append(cand_dists)

        cur_misclassified = _misclassified_set(state.num_learners)
        stop, reason = should_stop(state.num_learners, cfg.max_learners,
                                   cur_misclassified, prev_misclassified,
                                   require_progress=cfg.require_progress)
        if stop and reason == "no progress":
            # The offending learner is dropped: it corrected nothing.
            state.learners.pop()
            state.embeddings.pop()
            state.round_errors.pop()
            if needs_edges:
                learner_train_scores.pop()
                learner_val_scores.pop()
                learner_test_scores.pop()
            if needs_nodes:
                learner_node_dists.pop()
            state.stopped, state.stop_reason = True, reason
            break

        report.rounds.append(_prefix_metrics(state.num_learners))
        prev_misclassified = cur_misclassified

        # Update the persistent weights for the next round.
        if cfg.algorithm == "samme_r" or cfg.algorithm == "concat_nn":
            if needs_edges:
                if update_source == "combined":
                    alphas = state.alphas()
                    scores_upd = ensemble_edge_scores(
                        [pairwise_scores(t, round_examples) for t in state.embeddings], alphas)
                else:
                    scores_upd = s_round
                new_w = samme_r_update(w_edges, y_round, scores_upd, cfg.boost_learning_rate)
            if needs_nodes:
                if update_source == "combined":
                    alphas = state.alphas()
                    dists_upd = ensemble_node_distributions(learner_node_dists, alphas)
                else:
                    dists_upd = cand_dists
                rows = dists_upd[[ex.node for ex in node_train]]
                labels_mat = np.stack([np.asarray(ex.label_vector) for ex in node_train])
                state.node_weights = clip_weights(
                    samme_r_update_distribution(state.node_weights, labels_mat, rows,
                                                cfg.boost_learning_rate),
                    cfg.weight_cap)
        if needs_edges:
            new_w = clip_weights(new_w, cfg.weight_cap)
            state.positive_weights = new_w[:len(train_pos)]
            neg_part = new_w[len(train_pos):]
            state.mean_negative_weight = float(neg_part.mean()) if neg_part.size else 0.0
            state.weight_diagnostics.append(
                {"round": state.num_learners, "sum": float(new_w.sum()),
                 "min": float(new_w.min()), "max": float(new_w.max())})
        elif needs_nodes:
            state.weight_diagnostics.append(
                {"round": state.num_learners, "sum": float(state.node_weights.sum()),
                 "min": float(state.node_weights.min()),
                 "max": float(state.node_weights.max())})

        if r2_perfect:
            state.stopped, state.stop_reason = True, "perfect learner"
            break
        if stop:
            state.stopped, state.stop_reason = True, reason
            break

    if not state.stopped:
        state.stopped, state.stop_reason = True, "budget"

    if cfg.algorithm == "concat_nn" and state.num_learners and needs_edges:
        state.concat_decoder = fit_concat_decoder(
            state, graph, train_eval, val_eval, seed=_derived_seed(seed, _TAG_CONCAT))
        report.concat_train_ap = average_precision(
            concat_nn_predict(state, examples=train_eval), y_train)
        report.concat_val_ap = average_precision(
            concat_nn_predict(state, examples=val_eval), y_val)
        report.concat_test_ap = average_precision(
            concat_nn_predict(state, examples=test_eval), y_test)

    if needs_edges and state.num_learners:
        report.final_margins = _final_margins(state, learner_train_scores, y_train, cfg.tau)
    return state, report


def _final_margins(state: BoostState, learner_train_scores, y_train, tau) -> List[MarginRecord]:
    alphas = state.alphas()
    scores = ensemble_edge_scores(learner_train_scores[:state.num_learners], alphas)
    return margin_records(np.clip(scores, 0.0, 1.0), y_train.astype(int), tau)
