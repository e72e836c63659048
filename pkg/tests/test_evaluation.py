import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

import oracles
from idks.evaluation import (
    BenchRow,
    _subset_codes,
    bench_runtime,
    median_rows,
    oracle_equivalence,
    psi_sweep,
    roc_auc,
    sliding_auc,
    uniformity_test,
)
from idks.exceptions import MetricError, ParameterError
from idks.streaming import StreamConfig, newest_replacements

scores_labels = st.integers(2, 60).flatmap(lambda n: st.tuples(
    st.lists(st.integers(-5, 5).map(float), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n)))


class TestRocAuc:
    def test_perfect(self):
        assert roc_auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0

    def test_all_ties(self):
        assert roc_auc([2.0] * 5, [1, 0, 0, 1, 0]) == 0.5

    def test_mixed(self):
        assert roc_auc([3, 2, 1], [1, 0, 1]) == 0.5

    def test_single_class(self):
        with pytest.raises(MetricError):
            roc_auc([1, 2], [0, 0])

    def test_bad_labels(self):
        with pytest.raises(MetricError):
            roc_auc([1, 2], [0, 2])

    def test_length_mismatch(self):
        with pytest.raises(MetricError):
            roc_auc([1, 2, 3], [0, 1])

    @given(scores_labels)
    def test_brute_force(self, sl):
        s, y = sl
        assume(0 < sum(y) < len(y))
        assert abs(roc_auc(s, y) - oracles.auc_pairs(s, y)) <= 1e-12

    @given(st.integers(2, 50), st.integers(0, 2**32 - 1))
    def test_negation_complement(self, n, seed):
        r = np.random.default_rng(seed)
        s = r.permutation(n).astype(float)
        y = r.integers(0, 2, n)
        assume(0 < y.sum() < n)
        assert roc_auc(s, y) == pytest.approx(1 - roc_auc(-s, y), abs=1e-12)

    def test_monotone_invariance(self, rng):
        s = rng.normal(size=100)
        y = rng.integers(0, 2, 100)
        assert roc_auc(s, y) == roc_auc(np.exp(s) * 3 + 1, y)


class TestSlidingAuc:
    def test_recomputation_oracle(self, rng):
        n, omega = 1000, 100
        idx = np.arange(n)
        s = rng.normal(size=n)
        y = (rng.random(n) < 0.1).astype(int)
        pts = sliding_auc(idx, s, y, omega, stride=37)
        assert pts
        for p in pts:
            sel = (idx >= p.center - omega) & (idx <= p.center + omega)
            assert sel.sum() == 2 * omega + 1
            assert p.auc == roc_auc(-s[sel], y[sel])
            assert (p.n_pos, p.n_neg) == (int(y[sel].sum()), int((1 - y[sel]).sum()))

    def test_interval_without_anomalies_skipped(self):
        n, omega = 500, 50
        y = np.zeros(n, dtype=int)
        y[450:] = 1
        pts = sliding_auc(np.arange(n), np.zeros(n), y, omega, stride=1)
        assert all(p.center + omega >= 450 for p in pts)

    def test_stride_equal_length(self, rng):
        n = 300
        pts = sliding_auc(np.arange(n), rng.normal(size=n), rng.integers(0, 2, n), 50, stride=n)
        assert len(pts) <= 1

    def test_unlabeled(self):
        with pytest.raises(MetricError):
            sliding_auc(np.arange(10), np.zeros(10), None, 2)

    def test_unsorted(self):
        with pytest.raises(MetricError):
            sliding_auc([0, 2, 1], [0, 0, 0], [0, 1, 0], 1)


class TestUniformity:
    def test_subset_codes_are_a_bijection(self):
        import itertools

        subs = np.array(list(itertools.combinations(range(7), 3)))
        codes = _subset_codes(subs[:, ::-1], 7)
        assert sorted(codes.tolist()) == list(range(math.comb(7, 3)))

    @pytest.mark.parametrize("omega,psi", [(5, 2), (6, 3), (8, 2)])
    def test_no_slides_passes(self, omega, psi):
        C = math.comb(omega, psi)
        assert uniformity_test(omega, psi, step=1, slides=0, trials=200 * C, seed=omega).passed

    def test_small_run_passes(self):
        res = uniformity_test(omega=5, psi=2, step=2, slides=4, trials=3000, seed=1)
        assert res.passed and res.dof == 9 and res.observed.sum() == 3000

    def test_sabotage_fails(self):
        res = uniformity_test(omega=5, psi=2, step=2, slides=4, trials=3000, seed=1, draw=newest_replacements)
        assert not res.passed and res.p_value < 1e-6

    def test_too_few_trials(self):
        with pytest.raises(ParameterError, match="trials"):
            uniformity_test(trials=10)

    def test_too_many_subsets(self):
        with pytest.raises(ParameterError):
            uniformity_test(omega=40, psi=5, trials=10**9)


def test_oracle_equivalence_small(rng):
    X = rng.integers(0, 8, size=(600, 2)).astype(float)
    out = oracle_equivalence(X, StreamConfig(omega=128, step=25, psi=4, t=10, seed=3))
    assert out["passed"] and out["updates"] == 19


def test_bench_rows(rng):
    X = rng.normal(size=(400, 2))
    grid = [StreamConfig(omega=100, step=50, psi=4, t=5, mode=m) for m in ("incremental", "retrain")]
    rows = bench_runtime(grid, X, repeats=2, max_updates=3)
    assert len(rows) == 4
    assert [r.seed for r in rows] == [0, 1, 0, 1]
    assert all(r.updates == 3 and r.mean_update_time > 0 for r in rows)
    med = median_rows(rows)
    assert [(r.mode, r.omega) for r in med] == [("incremental", 100), ("retrain", 100)]
    assert isinstance(med[0], BenchRow)


def test_psi_sweep(rng):
    X = rng.normal(size=(300, 2))
    y = (rng.random(300) < 0.1).astype(int)
    tpl = StreamConfig(omega=100, step=50, psi=2, t=5)
    rows, best = psi_sweep(X, y, tpl, [4])
    assert best == 4 and len(rows) == 1
    rows, best = psi_sweep(X, y, tpl, [2, 4, 8])
    assert best == max(rows, key=lambda r: (r.auc, -r.psi)).psi
    with pytest.raises(ParameterError):
        psi_sweep(X, y, tpl, [])
