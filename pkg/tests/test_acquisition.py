import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from predstab import nn
from predstab.acquisition import (
    EpochSchedule,
    SnapshotTensor,
    StrategySpec,
    absolute_increase_score,
    entropy_score,
    epoch_schedule,
    least_confidence_score,
    score_pool,
    select_top_b,
    variance_score,
    write_snapshots_csv,
)
from predstab.errors import InvalidArgument

from oracles import brute_absolute_increase, brute_select, brute_variance


class TestEpochSchedule:
    def test_interval_five(self):
        assert epoch_schedule(164, 5, 5).epochs == (164, 159, 154, 149, 144)

    def test_interval_one(self):
        assert epoch_schedule(164, 1, 5).epochs == (164, 163, 162, 161, 160)

    def test_underflow(self):
        with pytest.raises(InvalidArgument):
            epoch_schedule(10, 5, 4)

    def test_reaches_epoch_one(self):
        assert epoch_schedule(9, 2, 5).epochs[-1] == 1

    @given(st.integers(1, 300), st.integers(1, 20), st.integers(1, 10))
    def test_formula(self, n_e, interval, count):
        if n_e - (count - 1) * interval < 1:
            with pytest.raises(InvalidArgument):
                epoch_schedule(n_e, interval, count)
            return
        s = epoch_schedule(n_e, interval, count)
        assert s.epochs == tuple(n_e - (i - 1) * interval for i in range(1, count + 1))
        assert s.position(n_e) == 0 and s.position(n_e + 1) is None


class TestSpatialScores:
    def test_entropy_uniform(self):
        assert entropy_score(np.full(10, 0.1)) == pytest.approx(2.3026, abs=1e-4)

    def test_entropy_one_hot(self):
        assert entropy_score([0.0, 1.0, 0.0]) == 0.0

    def test_entropy_half(self):
        assert entropy_score([0.5, 0.5]) == pytest.approx(0.6931, abs=1e-4)
        assert entropy_score([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-6)

    def test_least_confidence(self):
        assert least_confidence_score([0.0, 1.0]) == 0.0
        assert least_confidence_score(np.full(4, 0.25)) == 0.75
        assert least_confidence_score([0.6, 0.3, 0.1]) == pytest.approx(0.4)

    @pytest.mark.parametrize("fn", [entropy_score, least_confidence_score])
    def test_not_normalized(self, fn):
        with pytest.raises(InvalidArgument):
            fn([0.5, 0.6])

    @settings(max_examples=200)
    @given(arrays(np.float64, st.integers(2, 10), elements=st.floats(-10, 10)))
    def test_entropy_bounded_and_max_at_uniform(self, logits):
        p = nn.softmax(logits)
        C = len(p)
        h = entropy_score(p)
        assert -1e-12 <= h <= math.log(C) + 1e-12
        if np.ptp(p) > 1e-6:
            assert h < entropy_score(np.full(C, 1 / C))


class TestSequentialScores:
    def test_identical(self):
        v = [0.2, 0.3, 0.5]
        assert variance_score([v, v, v]) == pytest.approx(0.0, abs=1e-15)
        assert absolute_increase_score([v, v]) == 0.0

    def test_swap(self):
        assert variance_score([[1, 0], [0, 1]]) == pytest.approx(0.5)
        assert absolute_increase_score([[1, 0], [0, 1]]) == pytest.approx(2.0)

    def test_scalar_ramp(self):
        assert variance_score([0.0, 0.5, 1.0]) == pytest.approx(1 / 6)
        assert absolute_increase_score([0.0, 0.5, 1.0]) == pytest.approx(1.0)

    @pytest.mark.parametrize("fn", [variance_score, absolute_increase_score])
    def test_single_epoch(self, fn):
        with pytest.raises(InvalidArgument):
            fn([[0.5, 0.5]])

    def test_against_oracles(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            n, C = rng.integers(2, 7), rng.integers(1, 11)
            s = rng.normal(size=(n, C))
            assert variance_score(s) == pytest.approx(brute_variance(s.tolist()), rel=1e-10, abs=1e-15)
            assert absolute_increase_score(s) == pytest.approx(
                brute_absolute_increase(s.tolist()), rel=1e-10, abs=1e-15)

    @settings(max_examples=100)
    @given(st.data())
    def test_order_invariances(self, data):
        n = data.draw(st.integers(2, 6))
        C = data.draw(st.integers(1, 6))
        s = data.draw(arrays(np.float64, (n, C), elements=st.floats(-5, 5)))
        perm = data.draw(st.permutations(range(n)))
        assert variance_score(s[list(perm)]) == pytest.approx(variance_score(s), rel=1e-9, abs=1e-12)
        assert absolute_increase_score(s[::-1]) == pytest.approx(
            absolute_increase_score(s), rel=1e-12, abs=1e-15)

    @settings(max_examples=100)
    @given(arrays(np.float64, st.tuples(st.integers(2, 6), st.integers(1, 6)),
                  elements=st.floats(-5, 5)))
    def test_variance_zero_iff_constant(self, s):
        v = variance_score(s)
        assert v >= 0
        spread = np.abs(s - s[0]).max()
        if spread == 0:
            assert v <= 1e-12
        elif spread > 1e-6:
            assert v > 0


def _tensor(values, space="softmax", pool_index=None, epochs=None):
    values = np.asarray(values, dtype=float)
    n_e, n_u = values.shape[:2]
    pool_index = np.arange(n_u) if pool_index is None else pool_index
    epochs = tuple(range(n_e * 2, 0, -2)[:n_e]) if epochs is None else epochs
    return SnapshotTensor(values, space, pool_index, epochs)


class TestScorePool:
    def test_entropy_rowwise(self):
        P = nn.softmax(np.random.default_rng(0).normal(size=(3, 4)))
        out = score_pool(StrategySpec("entropy"), final_predictions=P)
        np.testing.assert_allclose(out, [entropy_score(p) for p in P], rtol=1e-12)

    def test_least_confidence_rowwise(self):
        P = nn.softmax(np.random.default_rng(1).normal(size=(5, 3)))
        out = score_pool(StrategySpec("least_confidence"), final_predictions=P)
        np.testing.assert_allclose(out, [least_confidence_score(p) for p in P])

    def test_stability_identical_slices(self):
        P = nn.softmax(np.random.default_rng(0).normal(size=(4, 3)))
        out = score_pool(StrategySpec("prediction_stability"), snapshots=_tensor([P, P]))
        assert np.all(out == 0)

    def test_sequential_rowwise(self):
        S = nn.softmax(np.random.default_rng(2).normal(size=(5, 6, 3)))
        t = _tensor(S)
        np.testing.assert_allclose(
            score_pool(StrategySpec("prediction_stability"), snapshots=t),
            [variance_score(S[:, i]) for i in range(6)], rtol=1e-12)
        np.testing.assert_allclose(
            score_pool(StrategySpec("absolute_increase"), snapshots=t),
            [absolute_increase_score(S[:, i]) for i in range(6)], rtol=1e-12)

    def test_random_deterministic(self):
        spec = StrategySpec("random", seed=4)
        P = np.full((6, 2), 0.5)
        a, b = score_pool(spec, final_predictions=P), score_pool(spec, final_predictions=P)
        assert np.array_equal(a, b)
        assert np.all((a >= 0) & (a < 1))

    def test_kind_input_mismatch(self):
        P = np.full((2, 2), 0.5)
        with pytest.raises(InvalidArgument):
            score_pool(StrategySpec("prediction_stability"), final_predictions=P)
        with pytest.raises(InvalidArgument):
            score_pool(StrategySpec("entropy"), snapshots=_tensor([P, P]))
        with pytest.raises(InvalidArgument):
            score_pool(StrategySpec("prediction_stability", space="logit"), snapshots=_tensor([P, P]))

    def test_spatial_rejects_logits(self):
        with pytest.raises(InvalidArgument):
            score_pool(StrategySpec("entropy"), final_predictions=np.array([[3.0, -1.0]]))

    def test_unfilled_snapshot_rejected(self):
        t = SnapshotTensor.empty(epoch_schedule(10, 2, 3), np.arange(4), 3, "softmax")
        with pytest.raises(InvalidArgument):
            score_pool(StrategySpec("prediction_stability"), snapshots=t)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(3)
        S = nn.softmax(rng.normal(size=(4, 9, 3)))
        perm = rng.permutation(9)
        spec = StrategySpec("prediction_stability")
        a = score_pool(spec, snapshots=_tensor(S))
        b = score_pool(spec, snapshots=_tensor(S[:, perm]))
        np.testing.assert_allclose(b, a[perm], rtol=1e-12)
        idx = np.arange(100, 109)
        top = select_top_b(a, idx, 3)
        assert set(select_top_b(b, idx[perm], 3)) == set(top)


class TestStrategySpec:
    def test_unknown_kind_lists_valid(self):
        with pytest.raises(InvalidArgument, match="prediction_stability"):
            StrategySpec("margin")

    def test_spatial_needs_softmax(self):
        with pytest.raises(InvalidArgument):
            StrategySpec("entropy", space="logit")

    def test_sequential_needs_two_epochs(self):
        with pytest.raises(InvalidArgument):
            StrategySpec("prediction_stability", count=1)

    def test_parse_and_label(self):
        s = StrategySpec.parse("prediction_stability@logit", interval=2)
        assert (s.kind, s.space, s.interval, s.label) == (
            "prediction_stability", "logit", 2, "prediction_stability@logit")
        assert StrategySpec.parse("entropy").label == "entropy"


class TestSelectTopB:
    def test_forced(self):
        assert select_top_b([0.1, 0.9, 0.5], [4, 7, 9], 2).tolist() == [7, 9]

    def test_tie_lowest_index(self):
        assert select_top_b([1.0, 1.0, 1.0], [8, 3, 5], 1).tolist() == [3]

    def test_zero(self):
        assert select_top_b([0.3], [1], 0).size == 0

    def test_clamped(self):
        assert sorted(select_top_b([0.3, 0.1], [5, 2], 10).tolist()) == [2, 5]

    def test_negative(self):
        with pytest.raises(InvalidArgument):
            select_top_b([0.3], [1], -1)

    def test_matches_exhaustive_search(self):
        rng = np.random.default_rng(12)
        for trial in range(150):
            n = int(rng.integers(1, 13))
            b = int(rng.integers(0, 4))
            # coarse grid forces ties in many instances
            scores = rng.integers(0, 4, size=n) / 4 if trial % 2 else rng.random(n)
            pool_index = np.sort(rng.choice(1000, size=n, replace=False))
            got = sorted(select_top_b(scores, pool_index, b).tolist())
            assert got == brute_select(scores.tolist(), pool_index.tolist(), b)


class TestNormalizationAblation:
    def test_softmax_space_ignores_logit_shift(self):
        rng = np.random.default_rng(5)
        logits = rng.normal(size=(5, 7, 4))
        shifts = rng.uniform(-20, 20, size=(5, 7, 1))
        spec = StrategySpec("prediction_stability")
        a = score_pool(spec, snapshots=_tensor(nn.softmax(logits)))
        b = score_pool(spec, snapshots=_tensor(nn.softmax(logits + shifts)))
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_logit_space_ranking_changes(self):
        # sample 0: small real change in belief; sample 1: large uniform logit drift
        # that leaves its softmax output untouched.
        logits = np.array([
            [[1.0, 0.0], [0.0, 0.0]],
            [[0.0, 1.0], [5.0, 5.0]],
        ])
        soft = score_pool(StrategySpec("prediction_stability"),
                          snapshots=_tensor(nn.softmax(logits)))
        raw = score_pool(StrategySpec("prediction_stability", space="logit"),
                         snapshots=_tensor(logits, space="logit"))
        assert soft[0] > soft[1] == 0
        assert raw[1] > raw[0]


def test_snapshot_csv(tmp_path):
    sched = EpochSchedule((10, 8), 2)
    values = np.arange(12, dtype=float).reshape(2, 3, 2)
    t = SnapshotTensor(values, "softmax", [9, 2, 5], sched.epochs)
    p = tmp_path / "s.csv"
    write_snapshots_csv(t, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "pool_index,epoch,c0,c1"
    keys = [tuple(int(v) for v in l.split(",")[:2]) for l in lines[1:]]
    assert keys == [(2, 10), (2, 8), (5, 10), (5, 8), (9, 10), (9, 8)]
    assert lines[1].split(",")[2:] == ["2.0", "3.0"]
