import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smoothgof.exceptions import ComplexityGuardError, NotPositiveDefiniteError, ParameterError, StateError
from smoothgof.stats import (
    StatConfig,
    critical_value,
    evaluate,
    lex_subsets,
    order_selection,
    order_selection_many,
    score_stat,
    statistic_many,
    subset_selection,
    subset_selection_many,
)


def _spd(rng, M):
    A = rng.normal(size=(M, M))
    return A @ A.T + M * np.eye(M)


class TestScoreStat:
    def test_unnormalized(self):
        assert score_stat([3.0, 4.0]) == 25.0

    def test_identity_gram_forms_agree(self):
        v = np.array([0.3, -1.2, 2.0])
        assert score_stat(v, np.eye(3), "normalized") == pytest.approx(score_stat(v))

    def test_scalar_normalized(self):
        assert score_stat([2.0], [[4.0]], "normalized") == pytest.approx(1.0)

    def test_normalized_needs_gram(self):
        with pytest.raises(ParameterError):
            score_stat([1.0], None, "normalized")


class TestOrderSelection:
    def test_example(self):
        res = order_selection([2.0, 4.0])
        assert res.value == 10.0 and res.chosen == (2,)

    def test_single_component(self):
        assert order_selection([1.5]).value == 2.25

    def test_ties_pick_smallest_order(self):
        assert order_selection([2.0, 2.0]).chosen == (1,)

    def test_normalized_matches_direct(self, rng):
        M = 6
        gram, v = _spd(rng, M), rng.normal(size=M)
        direct = [score_stat(v[:m], gram[:m, :m], "normalized") / m for m in range(1, M + 1)]
        res = order_selection(v, gram, "normalized")
        assert res.value == pytest.approx(max(direct), rel=1e-12)
        assert res.chosen == (int(np.argmax(direct)) + 1,)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefiniteError):
            order_selection([1.0, 1.0], np.diag([1.0, -1.0]), "normalized")


class TestSubsetSelection:
    def test_example(self):
        res = subset_selection([2.0, 4.0])
        assert res.value == 16.0 and res.chosen == (2,)

    def test_lex_order(self):
        assert lex_subsets(3) == ((0,), (0, 1), (0, 1, 2), (0, 2), (1,), (1, 2), (2,))
        assert len(lex_subsets(8)) == 2 ** 8 - 1

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(-3, 3), min_size=1, max_size=8))
    def test_fast_path_exact_with_ties(self, ints):
        V = np.array(ints, dtype=float)[None, :]
        fast = subset_selection_many(V)
        slow = subset_selection_many(V, method="enumerate")
        assert fast[0][0] == slow[0][0]
        assert tuple(fast[1][0]) == tuple(slow[1][0])

    def test_normalized_enumeration(self, rng):
        M = 4
        gram, v = _spd(rng, M), rng.normal(size=M)
        best = max(score_stat(v[list(B)], gram[np.ix_(B, B)], "normalized") / len(B)
                   for B in lex_subsets(M))
        assert subset_selection(v, gram, "normalized").value == pytest.approx(best, rel=1e-12)

    def test_normalized_guard(self):
        with pytest.raises(ComplexityGuardError):
            subset_selection_many(np.ones((1, 21)), np.eye(21), "normalized")

    def test_unnormalized_no_guard(self):
        assert subset_selection(np.arange(30.0)).value == 29.0 ** 2


class TestConfig:
    def test_descriptor(self):
        assert StatConfig("unnormalized", 10, "order").descriptor == "order/unnormalized/M=10"
        assert StatConfig(M=4, selection="fixed-m", fixed_m=2).descriptor == "fixed-m=2/unnormalized/M=4"

    @pytest.mark.parametrize("kw", [dict(form="x"), dict(selection="x"), dict(M=0),
                                    dict(selection="fixed-m"), dict(selection="fixed-m", fixed_m=9)])
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            StatConfig(**kw)

    @pytest.mark.parametrize("form", ["unnormalized", "normalized"])
    @pytest.mark.parametrize("selection", ["order", "subset", "fixed-m"])
    def test_batch_matches_single(self, rng, form, selection):
        M = 5
        gram = _spd(rng, 7)
        cfg = StatConfig(form, M, selection, 3 if selection == "fixed-m" else None)
        V = rng.normal(size=(6, 7))
        batch = statistic_many(V, gram, cfg)
        single = [evaluate(v, gram, cfg).value for v in V]
        np.testing.assert_allclose(batch, single, rtol=1e-12)

    def test_order_many_shapes(self, rng):
        vals, m = order_selection_many(rng.normal(size=(4, 3)))
        assert vals.shape == (4,) and m.shape == (4,)


class TestCriticalValue:
    def test_order_statistic(self):
        assert critical_value(np.arange(1.0, 101.0), 0.05) == 95.0

    def test_alpha_near_one(self):
        assert critical_value([3.0, 1.0, 2.0], 0.999) == 1.0

    def test_degenerate(self):
        assert critical_value(np.full(10, 2.5), 0.1) == 2.5

    def test_empty(self):
        with pytest.raises(StateError):
            critical_value([], 0.05)

    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.1])
    def test_bad_alpha(self, alpha):
        with pytest.raises(ParameterError):
            critical_value([1.0], alpha)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200), st.floats(0.001, 0.999))
    def test_rejection_rate_bounded(self, values, alpha):
        c = critical_value(values, alpha)
        assert np.mean(np.asarray(values) > c) <= alpha + 1e-12
