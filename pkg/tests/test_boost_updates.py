"""Boosting weight updates against hand-derived values and oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import r2_oracle, samme_r_oracle

from graphboost.boosting import (
    WeakLearningViolation,
    adaboost_r2_round,
    clip_weights,
    init_weights,
    samme_r_update,
    samme_r_update_distribution,
    should_stop,
)


def sigma(x):
    return 1.0 / (1.0 + math.exp(-x))


class TestInitWeights:
    def test_quarter_weights(self):
        np.testing.assert_array_equal(init_weights(4), [0.25] * 4)

    def test_single_example(self):
        np.testing.assert_array_equal(init_weights(1), [1.0])

    def test_sum_exactly_one(self):
        assert init_weights(7).sum() == pytest.approx(1.0, abs=1e-15)

    def test_zero_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            init_weights(0)


class TestSammeR:
    def test_score_half_leaves_weight_unchanged(self):
        w = samme_r_update([0.5, 0.5], [1, 0], [0.5, 0.5], boost_lr=1.0)
        np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-15)

    def test_confident_correct_positive_shrinks(self):
        # Pair one sigma(1)-scored positive with a neutral one: the weight
        # ratio equals the multiplier exp(-1/2).
        w = samme_r_update([0.5, 0.5], [1, 1], [sigma(1.0), 0.5], boost_lr=1.0)
        assert w[0] / w[1] == pytest.approx(math.exp(-0.5), rel=1e-12)

    def test_two_positive_worked_example(self):
        w = samme_r_update([0.5, 0.5], [1, 1], [sigma(1.0), sigma(-1.0)], boost_lr=1.0)
        # Hand evaluation: multipliers exp(-1/2), exp(+1/2); renormalizing
        # gives (1/(1+e), e/(1+e)).
        e = math.e
        np.testing.assert_allclose(w, [1 / (1 + e), e / (1 + e)], atol=1e-12)
        np.testing.assert_allclose(w, [0.26894, 0.73106], atol=1e-5)
        assert w[1] > w[0]  # the misclassified example rises

    def test_boost_lr_scales_exponent(self):
        w1 = samme_r_update([0.5, 0.5], [1, 1], [sigma(1.0), 0.5], boost_lr=1.0)
        w3 = samme_r_update([0.5, 0.5], [1, 1], [sigma(1.0), 0.5], boost_lr=3.0)
        assert w3[0] / w3[1] == pytest.approx((w1[0] / w1[1]) ** 3, rel=1e-10)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="align"):
            samme_r_update([0.5, 0.5], [1], [0.5, 0.5], 1.0)

    def test_non_binary_labels_rejected(self):
        with pytest.raises(ValueError, match="binary"):
            samme_r_update([1.0], [0.5], [0.5], 1.0)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_simplex_preserved(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 30))
        w = rng.dirichlet(np.ones(n))
        y = rng.integers(0, 2, size=n)
        y[0] = 1
        s = rng.uniform(0.01, 0.99, size=n)
        out = samme_r_update(w, y, s, boost_lr=float(rng.choice([1.0, 2.0, 3.0])))
        assert (out > 0).all()
        assert out.sum() == pytest.approx(1.0, abs=1e-9)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_score_badness(self, seed):
        # Equal prior weight, same label: the worse-scored example ends heavier.
        rng = np.random.default_rng(seed)
        s1, s2 = sorted(rng.uniform(0.01, 0.99, size=2))
        if s1 == s2:
            s2 = min(s2 + 0.01, 0.99)
        out = samme_r_update([0.5, 0.5], [1, 1], [s1, s2], boost_lr=1.0)
        assert out[0] > out[1]
        out0 = samme_r_update([0.5, 0.5], [0, 0], [s1, s2], boost_lr=1.0)
        assert out0[1] > out0[0]

    def test_scale_invariance_of_renormalization(self):
        rng = np.random.default_rng(3)
        w = rng.uniform(0.1, 1.0, size=10)
        y = rng.integers(0, 2, size=10)
        s = rng.uniform(0.05, 0.95, size=10)
        a = samme_r_update(w / w.sum(), y, s, 2.0)
        b = samme_r_update(5.0 * w / w.sum(), y, s, 2.0)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_matches_extended_precision_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            n = int(rng.integers(2, 40))
            w = rng.dirichlet(np.ones(n))
            y = rng.integers(0, 2, size=n)
            s = rng.uniform(1e-6, 1 - 1e-6, size=n)
            lr = float(rng.choice([1.0, 2.0, 3.0]))
            got = samme_r_update(w, y, s, lr)
            want = samme_r_oracle(w, y, s, lr)
            np.testing.assert_allclose(got, want, atol=1e-9)

    def test_distribution_update_raises_poorly_predicted(self):
        labels = np.array([[1.0, 0.0], [0.0, 1.0]])
        dists = np.array([[0.9, 0.1], [0.9, 0.1]])  # second row badly wrong
        out = samme_r_update_distribution([0.5, 0.5], labels, dists, boost_lr=1.0)
        assert out[1] > out[0]
        assert out.sum() == pytest.approx(1.0, abs=1e-12)


class TestAdaBoostR2:
    def test_perfect_learner_stops(self):
        r = adaboost_r2_round([0.5, 0.5], [1.0, 0.0], [1.0, 0.0])
        assert r.status == "perfect"
        assert r.average_loss == 0.0
        np.testing.assert_array_equal(r.weights, [0.5, 0.5])

    def test_uniform_losses_leave_weights_unchanged(self):
        r = adaboost_r2_round([0.25] * 4, [1.0] * 4, [0.7] * 4)
        np.testing.assert_allclose(r.weights, [0.25] * 4, atol=1e-12)

    def test_worked_example(self):
        # losses (0, 0.4) with equal weights: avg 0.2, beta 0.25,
        # multipliers (0.25, 0.25**0.6).
        r = adaboost_r2_round([0.5, 0.5], [1.0, 1.0], [1.0, 0.6])
        assert r.average_loss == pytest.approx(0.2, abs=1e-12)
        m0, m1 = 0.25, 0.25 ** 0.6
        expect = np.array([0.5 * m0, 0.5 * m1])
        expect /= expect.sum()
        np.testing.assert_allclose(r.weights, expect, atol=1e-12)
        np.testing.assert_allclose(r.weights, [0.36475, 0.63525], atol=1e-4)
        assert r.coefficient == pytest.approx(math.log(1 / 0.25), abs=1e-12)

    def test_weak_learning_violation(self):
        with pytest.raises(WeakLearningViolation, match="0.5"):
            adaboost_r2_round([0.5, 0.5], [1.0, 1.0], [0.2, 0.4])

    def test_bootstrap_deterministic_and_weighted(self):
        w = np.array([0.05, 0.9, 0.05])
        a = adaboost_r2_round(w, [1.0, 1.0, 1.0], [0.9, 0.6, 0.95], seed=5)
        b = adaboost_r2_round(w, [1.0, 1.0, 1.0], [0.9, 0.6, 0.95], seed=5)
        np.testing.assert_array_equal(a.bootstrap_indices, b.bootstrap_indices)
        counts = np.bincount(a.bootstrap_indices, minlength=3)
        assert counts[1] > counts[0] and counts[1] > counts[2]

    def test_score_range_validated(self):
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            adaboost_r2_round([1.0], [1.0], [1.2])

    def test_matches_extended_precision_oracle(self):
        rng = np.random.default_rng(123)
        done = 0
        while done < 1000:
            n = int(rng.integers(2, 40))
            w = rng.dirichlet(np.ones(n))
            y = rng.integers(0, 2, size=n).astype(float)
            s = rng.uniform(0, 1, size=n)
            want, beta, avg = r2_oracle(w, y, s)
            if want is None:
                with pytest.raises(WeakLearningViolation):
                    adaboost_r2_round(w, y, s)
            else:
                got = adaboost_r2_round(w, y, s)
                np.testing.assert_allclose(got.weights, want, atol=1e-9)
            done += 1


class TestClipWeights:
    def test_cap_and_redistribute(self):
        w = clip_weights(np.array([0.9, 0.05, 0.05]), cap=0.5)
        assert w[0] == pytest.approx(0.5)
        assert w[1] == pytest.approx(0.25)
        assert w[2] == pytest.approx(0.25)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)

    def test_noop_when_under_cap(self):
        w = clip_weights(np.array([0.4, 0.3, 0.3]), cap=0.5)
        np.testing.assert_allclose(w, [0.4, 0.3, 0.3], atol=1e-12)

    def test_infeasible_cap_returns_normalized(self):
        np.testing.assert_array_equal(clip_weights(np.array([2.0]), cap=0.5), [1.0])

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_result_is_capped_simplex(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 20))
        w = clip_weights(rng.uniform(0.01, 1.0, size=n), cap=0.5)
        assert w.sum() == pytest.approx(1.0, abs=1e-9)
        assert (w <= 0.5 + 1e-9).all()
        assert (w > 0).all()


class TestShouldStop:
    def test_perfect_fit(self):
        assert should_stop(2, 10, set(), {1, 2}) == (True, "perfect fit")

    def test_progress_continues(self):
        stop, reason = should_stop(2, 10, {2, 3}, {1, 2})
        assert not stop and reason is None

    def test_no_progress_stops(self):
        assert should_stop(2, 10, {1, 2, 5}, {1, 2}) == (True, "no progress")

    def test_no_progress_rule_can_be_disabled(self):
        stop, _ = should_stop(2, 10, {1, 2}, {1, 2}, require_progress=False)
        assert not stop

    def test_budget(self):
        assert should_stop(10, 10, {3}, {1, 3}) == (True, "budget")

    def test_first_round_has_no_previous(self):
        stop, reason = should_stop(1, 10, {1}, None)
        assert not stop
