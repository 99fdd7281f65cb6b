"""Encoder aggregation semantics, decoders, and weighted losses."""

import math

import numpy as np
import pytest

from graphboost.decoders import decode_mlp_node, decode_mlp_pairwise, decode_node, decode_pairwise
from graphboost.encoder import (
    EncoderConfig,
    WeakLearnerParams,
    encode,
    encode_batch,
    init_weak_learner,
    node_embeddings,
)
from graphboost.gradcheck import grad_check
from graphboost.graphs import Graph, NeighborhoodSample
from graphboost.losses import link_loss, multitask_loss, node_loss
from graphboost.synthetic import gen_synthetic_multimodal
from graphboost.tensor import Tape, backward, constant, parameter, zero_grad


def passthrough_params(dim, kind="mean_pool", heads=1):
    """Parameters wired so the encoder output equals the raw aggregate."""
    enc = {}
    if kind == "mean_pool":
        enc["w_nbr"] = parameter(np.eye(dim))
    else:
        dh = dim // heads
        for h in range(heads):
            w = np.zeros((dim, dh))
            w[h * dh:(h + 1) * dh] = np.eye(dh)
            enc[f"w_head{h}"] = parameter(np.eye(dim)[:, h * dh:(h + 1) * dh] if heads == 1 else w)
            enc[f"a_src{h}"] = parameter(np.zeros((dh, 1)))
            enc[f"a_dst{h}"] = parameter(np.zeros((dh, 1)))
    enc["w_self"] = parameter(np.zeros((dim, dim)))
    comb = np.zeros((2 * dim, dim))
    comb[dim:] = np.eye(dim)
    enc["w_comb"] = parameter(comb)
    enc["b_comb"] = parameter(np.zeros((1, dim)))
    return WeakLearnerParams(encoder=enc)


class TestEncoderConfig:
    def test_layers_fixed_at_one(self):
        with pytest.raises(ValueError, match="fixed at 1"):
            EncoderConfig(kind="mean_pool", input_dim=4, embed_dim=4, num_layers=2)

    def test_attention_head_divisibility(self):
        with pytest.raises(ValueError, match="divisible"):
            EncoderConfig(kind="attention", input_dim=4, embed_dim=5, num_heads=2)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            EncoderConfig(kind="gcn", input_dim=4, embed_dim=4)


class TestEncoderSemantics:
    def test_mean_pool_identity_transform_averages_neighbors(self):
        g = Graph(3, [(0, 1), (0, 2)],
                  node_features=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
        cfg = EncoderConfig(kind="mean_pool", input_dim=2, embed_dim=2,
                            neighbor_sample_size=5)
        params = passthrough_params(2)
        z = encode(params, cfg, g, 0, NeighborhoodSample(0, [1, 2]))
        np.testing.assert_allclose(z.values, [[0.5, 0.5]], atol=1e-15)

    def test_attention_single_neighbor_weight_is_one(self):
        feats = np.array([[0.3, -0.2], [1.0, 2.0], [0.0, 0.0]])
        cfg = EncoderConfig(kind="attention", input_dim=2, embed_dim=2,
                            neighbor_sample_size=5)
        outs = []
        for a_val in (0.0, 3.7, -1.9):
            params = passthrough_params(2, kind="attention")
            params.encoder["a_src0"].values[...] = a_val
            params.encoder["a_dst0"].values[...] = -a_val
            weights = []
            z = encode_batch(params, cfg, feats, [0], [np.array([1])],
                             attention_out=weights)
            np.testing.assert_array_equal(weights[0], [[1.0]])
            outs.append(z.values.copy())
        np.testing.assert_array_equal(outs[0], outs[1])
        np.testing.assert_array_equal(outs[0], outs[2])

    def test_attention_identical_neighbors_equals_mean_pool(self):
        rng = np.random.default_rng(0)
        feats = np.vstack([rng.normal(size=2), [[0.4, -1.2]] * 3])
        cfg_att = EncoderConfig(kind="attention", input_dim=2, embed_dim=2,
                                neighbor_sample_size=5)
        cfg_mean = EncoderConfig(kind="mean_pool", input_dim=2, embed_dim=2,
                                 neighbor_sample_size=5)
        shared = rng.normal(size=(2, 2))
        att = passthrough_params(2, kind="attention")
        att.encoder["w_head0"] = parameter(shared.copy())
        att.encoder["a_src0"].values[...] = rng.normal(size=(2, 1))
        att.encoder["a_dst0"].values[...] = rng.normal(size=(2, 1))
        mean = passthrough_params(2)
        mean.encoder["w_nbr"] = parameter(shared.copy())
        nbrs = [np.array([1, 2, 3])]
        za = encode_batch(att, cfg_att, feats, [0], nbrs)
        zm = encode_batch(mean, cfg_mean, feats, [0], nbrs)
        np.testing.assert_allclose(za.values, zm.values, atol=1e-12)

    def test_permutation_invariance_is_exact(self):
        rng = np.random.default_rng(1)
        feats = rng.normal(size=(8, 4))
        for kind in ("mean_pool", "attention"):
            cfg = EncoderConfig(kind=kind, input_dim=4, embed_dim=4,
                                num_heads=2 if kind == "attention" else 1,
                                neighbor_sample_size=8)
            params = init_weak_learner(cfg, np.random.default_rng(2))
            a = encode_batch(params, cfg, feats, [0], [np.array([1, 2, 3, 5])])
            b = encode_batch(params, cfg, feats, [0], [np.array([5, 3, 1, 2])])
            assert a.values.tobytes() == b.values.tobytes()

    def test_attention_weights_sum_to_one_per_head(self):
        rng = np.random.default_rng(3)
        feats = rng.normal(size=(30, 6))
        cfg = EncoderConfig(kind="attention", input_dim=6, embed_dim=6, num_heads=3,
                            neighbor_sample_size=10)
        params = init_weak_learner(cfg, rng)
        lists = [rng.choice(30, size=n, replace=False) for n in (4, 7, 1)]
        weights = []
        encode_batch(params, cfg, feats, [0, 1, 2], lists, attention_out=weights)
        assert len(weights) == 3
        for head in weights:
            offset = 0
            for n in (4, 7, 1):
                np.testing.assert_allclose(head[offset:offset + n].sum(), 1.0, atol=1e-12)
                offset += n

    def test_isolated_node_gets_zero_aggregate(self):
        feats = np.array([[1.0, 2.0], [3.0, 4.0]])
        cfg = EncoderConfig(kind="mean_pool", input_dim=2, embed_dim=2,
                            neighbor_sample_size=5)
        params = passthrough_params(2)
        z = encode_batch(params, cfg, feats, [0], [np.zeros(0, dtype=np.int64)])
        np.testing.assert_array_equal(z.values, [[0.0, 0.0]])

    def test_feature_dim_mismatch_rejected(self):
        cfg = EncoderConfig(kind="mean_pool", input_dim=3, embed_dim=2)
        params = passthrough_params(2)
        with pytest.raises(ValueError, match="input_dim"):
            encode_batch(params, cfg, np.ones((4, 2)), [0], [np.array([1])])

    def test_exclude_self_ignores_center_features(self):
        rng = np.random.default_rng(4)
        feats = rng.normal(size=(5, 3))
        cfg = EncoderConfig(kind="attention", input_dim=3, embed_dim=3,
                            neighbor_sample_size=4, include_self_in_node_task=False)
        params = init_weak_learner(cfg, rng)
        nbrs = [np.array([2, 3])]
        z1 = encode_batch(params, cfg, feats, [0], nbrs, include_self=False)
        feats2 = feats.copy()
        feats2[0] = rng.normal(size=3)  # perturb only the center's own features
        z2 = encode_batch(params, cfg, feats2, [0], nbrs, include_self=False)
        np.testing.assert_array_equal(z1.values, z2.values)


class TestDecoders:
    def test_orthogonal_embeddings_score_half(self):
        z_i = constant([[1.0, 0.0]])
        z_j = constant([[0.0, 1.0]])
        assert decode_pairwise(z_i, z_j).item() == 0.5

    def test_unit_norm_self_similarity(self):
        z = constant([[0.6, 0.8]])
        assert decode_pairwise(z, z).item() == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-12)

    def test_symmetry_bitwise(self):
        rng = np.random.default_rng(5)
        a = constant(rng.normal(size=(10, 6)))
        b = constant(rng.normal(size=(10, 6)))
        ab = decode_pairwise(a, b).values
        ba = decode_pairwise(b, a).values
        assert ab.tobytes() == ba.tobytes()

    def test_isolated_node_zero_embedding_still_decodes_to_distribution(self):
        # Empty neighborhood + excluded self gives a zero aggregate; the
        # decoder must still emit a valid distribution.
        rng = np.random.default_rng(12)
        dec = {
            "w1": parameter(rng.normal(size=(4, 4))), "b1": parameter(rng.normal(size=(1, 4))),
            "w2": parameter(rng.normal(size=(4, 3))), "b2": parameter(rng.normal(size=(1, 3))),
        }
        r = decode_node(constant(np.zeros((1, 4))), dec)
        assert (r.values > 0).all()
        assert r.values.sum() == pytest.approx(1.0, abs=1e-12)

    def test_zero_decoder_gives_uniform_distribution(self):
        dec = {
            "w1": parameter(np.zeros((4, 4))), "b1": parameter(np.zeros((1, 4))),
            "w2": parameter(np.zeros((4, 5))), "b2": parameter(np.zeros((1, 5))),
        }
        r = decode_node(constant(np.zeros((3, 4))), dec)
        np.testing.assert_allclose(r.values, 0.2, atol=1e-15)

    def test_distribution_rows_sum_to_one(self):
        rng = np.random.default_rng(6)
        dec = {
            "w1": parameter(rng.normal(size=(4, 6))), "b1": parameter(rng.normal(size=(1, 6))),
            "w2": parameter(rng.normal(size=(6, 3))), "b2": parameter(rng.normal(size=(1, 3))),
        }
        r = decode_node(constant(rng.normal(size=(7, 4))), dec)
        assert (r.values > 0).all()
        np.testing.assert_allclose(r.values.sum(axis=1), 1.0, atol=1e-12)

    def test_mlp_pairwise_dimension_check(self):
        dec = {
            "w1": parameter(np.zeros((8, 4))), "b1": parameter(np.zeros((1, 4))),
            "w2": parameter(np.zeros((4, 1))), "b2": parameter(np.zeros((1, 1))),
        }
        with pytest.raises(ValueError, match="decoder input"):
            decode_mlp_pairwise(constant(np.ones((2, 6))), constant(np.ones((2, 6))), dec)
        out = decode_mlp_pairwise(constant(np.ones((2, 8))), constant(np.ones((2, 8))), dec)
        assert out.shape == (2, 1)

    def test_mlp_node_rows_are_distributions(self):
        rng = np.random.default_rng(7)
        dec = {
            "w1": parameter(rng.normal(size=(6, 4))), "b1": parameter(np.zeros((1, 4))),
            "w2": parameter(rng.normal(size=(4, 3))), "b2": parameter(np.zeros((1, 3))),
        }
        r = decode_mlp_node(constant(rng.normal(size=(5, 6))), dec)
        np.testing.assert_allclose(r.values.sum(axis=1), 1.0, atol=1e-12)


class TestLosses:
    def test_single_positive_at_half_is_log_two(self):
        loss = link_loss(constant([[0.5]]), [1], [1.0])
        assert loss.item() == pytest.approx(math.log(2), abs=1e-12)

    def test_perfect_predictions_vanish(self):
        scores = constant([[1.0 - 1e-12], [1e-12]])
        loss = link_loss(scores, [1, 0], [1.0, 1.0])
        assert loss.item() < 2e-10

    def test_doubling_weights_doubles_loss(self):
        scores = constant([[0.3], [0.8], [0.6]])
        l1 = link_loss(scores, [1, 0, 1], [0.2, 0.5, 0.3]).item()
        l2 = link_loss(scores, [1, 0, 1], [0.4, 1.0, 0.6]).item()
        assert l2 == pytest.approx(2 * l1, rel=1e-12)

    def test_nonpositive_weight_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            link_loss(constant([[0.5]]), [1], [0.0])

    def test_node_loss_uniform_prediction(self):
        r = constant(np.full((1, 4), 0.25))
        y = np.array([[1.0, 0.0, 0.0, 0.0]])
        assert node_loss(r, y, [1.0]).item() == pytest.approx(math.log(4), abs=1e-12)

    def test_node_loss_exact_prediction_vanishes(self):
        y = np.array([[0.0, 1.0, 0.0]])
        r = constant(np.array([[1e-12, 1.0 - 2e-12, 1e-12]]))
        assert node_loss(r, y, [1.0]).item() < 1e-10

    def test_node_loss_weight_linearity(self):
        r = constant(np.array([[0.2, 0.8]]))
        y = np.array([[0.0, 1.0]])
        full = node_loss(r, y, [1.0]).item()
        half = node_loss(r, y, [0.5]).item()
        assert half == pytest.approx(0.5 * full, rel=1e-12)

    def test_node_loss_unnormalized_label_rejected(self):
        r = constant(np.array([[0.5, 0.5]]))
        with pytest.raises(ValueError, match="normalized"):
            node_loss(r, np.array([[0.5, 0.6]]), [1.0])

    def test_multitask_identities_and_blend(self):
        link_part = constant(0.6)
        node_part = constant(1.0)
        assert multitask_loss(link_part, node_part, 1.0).item() == 0.6
        assert multitask_loss(link_part, node_part, 0.0).item() == 1.0
        assert multitask_loss(link_part, node_part, 0.5).item() == pytest.approx(0.8, abs=1e-15)
        with pytest.raises(ValueError, match="mix"):
            multitask_loss(link_part, node_part, 1.5)

    def test_weighted_gradient_scales_linearly(self):
        rng = np.random.default_rng(8)
        z = rng.normal(size=(1, 4))
        grads = {}
        for w in (1.0, 2.0):
            p = parameter(rng.normal(size=(4, 4)))
            p.values[...] = np.eye(4)
            zero_grad([p])
            with Tape() as tape:
                from graphboost.tensor import matmul
                zi = matmul(constant(z), p)
                score = decode_pairwise(zi, constant(z))
                loss = link_loss(score, [1], [w])
            backward(loss, tape)
            grads[w] = p.grad.copy()
        np.testing.assert_allclose(grads[2.0], 2 * grads[1.0], atol=1e-10)


class TestFullCompositionGradients:
    def seven_node_graph(self):
        sg = gen_synthetic_multimodal(
            num_nodes=7, num_modes=3, feature_dim_per_mode=2, modes_per_node=2,
            intra_mode_edge_prob=0.4, noise_edge_prob=0.0, seed=0, taste_quantile=0.3)
        return sg.graph

    @pytest.mark.parametrize("kind", ["mean_pool", "attention"])
    def test_encoder_decoder_bce_grad_check(self, kind):
        g = self.seven_node_graph()
        cfg = EncoderConfig(kind=kind, input_dim=6, embed_dim=4,
                            num_heads=2 if kind == "attention" else 1,
                            neighbor_sample_size=4)
        params = init_weak_learner(cfg, np.random.default_rng(9))
        pairs = [(u, v) for u, v in g.edges][:4] + [(0, 4), (2, 6)]
        labels = [1, 1, 1, 1, 0, 0]
        lists = [np.sort(g.neighbors(u)) for u, _ in pairs]
        lists_j = [np.sort(g.neighbors(v)) for _, v in pairs]

        def fwd():
            zi = encode_batch(params, cfg, g.node_features, [u for u, _ in pairs], lists)
            zj = encode_batch(params, cfg, g.node_features, [v for _, v in pairs], lists_j)
            return link_loss(decode_pairwise(zi, zj), labels, [1.0] * len(pairs))

        report = grad_check(fwd, params.all_params(), tolerance=1e-4)
        assert report.passed, report.max_relative_error

    def test_encoder_node_decoder_cross_entropy_grad_check(self):
        g = self.seven_node_graph()
        cfg = EncoderConfig(kind="attention", input_dim=6, embed_dim=4, num_heads=1,
                            neighbor_sample_size=4, include_self_in_node_task=False)
        params = init_weak_learner(cfg, np.random.default_rng(10), label_dim=3)
        nodes = [0, 1, 2, 3]
        lists = [np.sort(g.neighbors(n)) for n in nodes]
        labels = g.node_labels[nodes]

        def fwd():
            z = encode_batch(params, cfg, g.node_features, nodes, lists, include_self=False)
            return node_loss(decode_node(z, params.decoder), labels, [1.0] * len(nodes))

        report = grad_check(fwd, params.all_params(), tolerance=1e-4)
        assert report.passed, report.max_relative_error


class TestNodeEmbeddings:
    def test_chunking_does_not_change_embeddings(self):
        sg = gen_synthetic_multimodal(
            num_nodes=40, num_modes=2, feature_dim_per_mode=3, modes_per_node=1,
            intra_mode_edge_prob=0.4, noise_edge_prob=0.0, seed=6)
        cfg = EncoderConfig(kind="mean_pool", input_dim=6, embed_dim=4,
                            neighbor_sample_size=3)
        params = init_weak_learner(cfg, np.random.default_rng(11))
        full = node_embeddings(params, cfg, sg.graph, seed=5)
        again = node_embeddings(params, cfg, sg.graph, seed=5)
        assert full.tobytes() == again.tobytes()
        # Chunk boundaries may reassociate float sums; values agree tightly.
        small = node_embeddings(params, cfg, sg.graph, seed=5, chunk=7)
        np.testing.assert_allclose(small, full, atol=1e-12, rtol=0)
        subset = node_embeddings(params, cfg, sg.graph, nodes=[3, 9], seed=5)
        np.testing.assert_allclose(subset, full[[3, 9]], atol=1e-12, rtol=0)
