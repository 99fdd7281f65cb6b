"""Boosted one-layer graph encoders over multiple embedding spaces.

A small reverse-mode autodiff core trains weak graph encoders (mean-pool or
additive attention, one layer) whose per-round example weights follow
SAMME.R or AdaBoost.R2; each retained learner contributes one embedding
space, and predictions combine across spaces (convex combination or a
shared nonlinear decoder over concatenated embeddings).
"""

from .boosting import (
    BoostConfig,
    BoostState,
    adaboost_r2_round,
    combine_node,
    combine_pairwise,
    concat_nn_predict,
    init_weights,
    samme_r_update,
    should_stop,
    train_boosted,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .decoders import decode_node, decode_pairwise
from .encoder import EncoderConfig, WeakLearnerParams, encode, node_embeddings
from .gradcheck import grad_check
from .graphs import EdgeExample, Graph, NeighborhoodSample, NodeExample, load_edge_csv, load_node_features
from .losses import link_loss, multitask_loss, node_loss
from .metrics import MetricsReport, average_precision, margin, margin_distribution
from .optim import AdamState, adam_step
from .sampling import sample_negatives, sample_neighbors
from .splits import SplitSpec, make_split
from .synthetic import gen_synthetic_multimodal
from .tensor import Tape, Tensor, backward, forward_op
from .training import TrainingConfig, fit_weak_learner

__version__ = "0.1.0"

__all__ = [
    "AdamState", "BoostConfig", "BoostState", "EdgeExample", "EncoderConfig",
    "Graph", "MetricsReport", "NeighborhoodSample", "NodeExample", "SplitSpec",
    "Tape", "Tensor", "TrainingConfig", "WeakLearnerParams", "adaboost_r2_round",
    "adam_step", "average_precision", "backward", "combine_node",
    "combine_pairwise", "concat_nn_predict", "decode_node", "decode_pairwise",
    "encode", "fit_weak_learner", "forward_op", "gen_synthetic_multimodal",
    "grad_check", "init_weights", "link_loss", "load_checkpoint",
    "load_edge_csv", "load_node_features", "make_split", "margin",
    "margin_distribution", "multitask_loss", "node_embeddings", "node_loss",
    "sample_negatives", "sample_neighbors", "samme_r_update", "save_checkpoint",
    "should_stop", "train_boosted",
]
