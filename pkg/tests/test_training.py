"""Weak-learner training loop: convergence, determinism, degenerate cases."""

import numpy as np
import pytest

from graphboost.encoder import EncoderConfig
from graphboost.graphs import EdgeExample, NodeExample
from graphboost.sampling import sample_negatives
from graphboost.splits import SplitSpec, make_split
from graphboost.synthetic import gen_synthetic_multimodal
from graphboost.training import TrainingConfig, fit_weak_learner


def separable_task():
    """Single-mode graph whose links are exactly the most-similar taste pairs."""
    sg = gen_synthetic_multimodal(
        num_nodes=500, num_modes=1, feature_dim_per_mode=8, modes_per_node=1,
        intra_mode_edge_prob=1.0, noise_edge_prob=0.0, seed=0,
        taste_quantile=0.95, feature_noise=1.0, centroid_scale=0.0,
        normalize_features=True)
    g = sg.graph
    split = make_split(g, SplitSpec(train_fraction=0.6, seed=0))
    train = list(split.train) + sample_negatives(g, split.train, seed=100)
    n = len(train)
    train = [EdgeExample(e.src, e.dst, e.label, 1.0 / n, e.origin) for e in train]
    val = list(split.validation) + sample_negatives(g, split.validation, seed=101)
    return g, train, val


def tiny_task(seed=0):
    sg = gen_synthetic_multimodal(
        num_nodes=60, num_modes=2, feature_dim_per_mode=4, modes_per_node=1,
        intra_mode_edge_prob=0.5, noise_edge_prob=0.0, seed=seed,
        taste_quantile=0.0, normalize_features=True)
    g = sg.graph
    split = make_split(g, SplitSpec(train_fraction=0.6, seed=0))
    train = list(split.train) + sample_negatives(g, split.train, seed=7)
    val = list(split.validation) + sample_negatives(g, split.validation, seed=8)
    return g, train, val


def test_separable_graph_reaches_high_validation_ap():
    g, train, val = separable_task()
    cfg = EncoderConfig(kind="attention", input_dim=8, embed_dim=32,
                        num_heads=1, neighbor_sample_size=10)
    params, diag = fit_weak_learner(
        g, train, val, cfg,
        TrainingConfig(learning_rate=1e-3, epochs=50, patience=10), seed=1)
    assert len(diag.val_aps) <= 50
    assert diag.best_val_ap > 0.95


def test_zero_epochs_returns_initialized_params():
    g, train, val = tiny_task()
    cfg = EncoderConfig(kind="mean_pool", input_dim=8, embed_dim=4,
                        neighbor_sample_size=5)
    params, diag = fit_weak_learner(
        g, train, val, cfg, TrainingConfig(epochs=0), seed=3)
    assert diag.train_losses == [] and diag.val_aps == []
    # Parameters equal a fresh Glorot draw from the same seed.
    params2, _ = fit_weak_learner(
        g, train, val, cfg, TrainingConfig(epochs=0), seed=3)
    for name, t in params.encoder.items():
        assert t.values.tobytes() == params2.encoder[name].values.tobytes()


def test_same_seed_gives_identical_final_parameters():
    g, train, val = tiny_task()
    cfg = EncoderConfig(kind="attention", input_dim=8, embed_dim=8,
                        num_heads=2, neighbor_sample_size=5)
    tc = TrainingConfig(learning_rate=1e-3, epochs=4, patience=3)
    pa, da = fit_weak_learner(g, train, val, cfg, tc, seed=11)
    pb, db = fit_weak_learner(g, train, val, cfg, tc, seed=11)
    for name in pa.encoder:
        assert pa.encoder[name].values.tobytes() == pb.encoder[name].values.tobytes()
    assert da.val_aps == db.val_aps
    pc, _ = fit_weak_learner(g, train, val, cfg, tc, seed=12)
    assert any(pa.encoder[n].values.tobytes() != pc.encoder[n].values.tobytes()
               for n in pa.encoder)


def test_empty_training_set_rejected():
    g, train, val = tiny_task()
    cfg = EncoderConfig(kind="mean_pool", input_dim=8, embed_dim=4)
    with pytest.raises(ValueError, match="empty edge training set"):
        fit_weak_learner(g, [], val, cfg, TrainingConfig(epochs=1), seed=0)


def test_unknown_task_rejected():
    g, train, val = tiny_task()
    cfg = EncoderConfig(kind="mean_pool", input_dim=8, embed_dim=4)
    with pytest.raises(ValueError, match="task"):
        fit_weak_learner(g, train, val, cfg, TrainingConfig(epochs=1), seed=0,
                         task="classify")


def test_recommend_task_trains_and_improves_micro_ap():
    sg = gen_synthetic_multimodal(
        num_nodes=80, num_modes=3, feature_dim_per_mode=4, modes_per_node=1,
        intra_mode_edge_prob=0.6, noise_edge_prob=0.0, seed=5,
        taste_quantile=0.0, normalize_features=True)
    g = sg.graph
    nodes = [NodeExample(i, tuple(g.node_labels[i]), 1.0 / g.num_nodes)
             for i in range(g.num_nodes)]
    train_nodes, val_nodes = nodes[:60], nodes[60:]
    cfg = EncoderConfig(kind="mean_pool", input_dim=12, embed_dim=8,
                        neighbor_sample_size=10, include_self_in_node_task=False)
    params, diag = fit_weak_learner(
        g, [], [], cfg, TrainingConfig(learning_rate=1e-3, epochs=25, patience=25),
        seed=2, task="recommend", train_nodes=train_nodes, val_nodes=val_nodes)
    assert params.decoder  # node head exists
    assert diag.best_val_ap > 0.55  # far above the 1/3 chance level


def test_multitask_uses_both_losses():
    g, train, val = tiny_task()
    nodes = [NodeExample(i, tuple(g.node_labels[i]), 1.0 / g.num_nodes)
             for i in range(g.num_nodes)]
    cfg = EncoderConfig(kind="mean_pool", input_dim=8, embed_dim=8,
                        neighbor_sample_size=5, include_self_in_node_task=False)
    params, diag = fit_weak_learner(
        g, train, val, cfg, TrainingConfig(epochs=3, patience=3), seed=4,
        task="multitask", train_nodes=nodes[:40], val_nodes=nodes[40:])
    assert params.decoder
    assert len(diag.train_losses) == 3
    assert not np.isnan(diag.val_aps).any()
