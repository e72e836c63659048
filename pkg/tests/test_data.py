import itertools
import math

import numpy as np
import pytest
from scipy import stats

from idks.data import (
    ArcDrift,
    LabeledDataset,
    TwoClusterSpec,
    gen_two_cluster,
    load_csv,
    shuffle_dataset,
    write_csv,
)
from idks.exceptions import IngestionError, ParameterError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_two_rows(self, tmp_path):
        ds = load_csv(write(tmp_path, "0.0,0.0,0\n1.0,1.0,1\n"))
        assert ds.X.tolist() == [[0.0, 0.0], [1.0, 1.0]]
        assert ds.y.tolist() == [0, 1]
        assert ds.d == 2

    def test_header_and_named_label(self, tmp_path):
        ds = load_csv(write(tmp_path, "label,a,b\n1,2.5,3\n0,4,5\n"), label_column="label", has_header=True)
        assert ds.X.tolist() == [[2.5, 3.0], [4.0, 5.0]]
        assert ds.y.tolist() == [1, 0]

    def test_minmax(self, tmp_path):
        ds = load_csv(write(tmp_path, "0,7,0\n4,7,0\n2,7,1\n8,9,0\n"), normalize="minmax", omega=3)
        assert ds.X[:, 0].tolist() == [0.0, 1.0, 0.5, 2.0]
        # constant over the fit window
        assert ds.X[:, 1].tolist() == [0.0, 0.0, 0.0, 0.0]

    def test_nan_names_row_and_column(self, tmp_path):
        with pytest.raises(IngestionError, match="row 2, column 2"):
            load_csv(write(tmp_path, "0,0,0\n1,nan,1\n"))

    def test_unparseable(self, tmp_path):
        with pytest.raises(IngestionError, match="row 1, column 1"):
            load_csv(write(tmp_path, "abc,0,0\n"))

    def test_non_binary_label(self, tmp_path):
        with pytest.raises(IngestionError, match="not 0 or 1"):
            load_csv(write(tmp_path, "0,0,2\n"))

    def test_ragged(self, tmp_path):
        with pytest.raises(IngestionError, match="row 2"):
            load_csv(write(tmp_path, "0,0,0\n1,1\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            load_csv(tmp_path / "nope.csv")

    def test_bad_normalize(self, tmp_path):
        with pytest.raises(ParameterError):
            load_csv(write(tmp_path, "0,0\n"), normalize="zscore")

    def test_write_round_trip(self, tmp_path, rng):
        ds = LabeledDataset(rng.normal(size=(20, 3)), rng.integers(0, 2, 20))
        write_csv(ds, tmp_path / "o.csv")
        back = load_csv(tmp_path / "o.csv", has_header=True)
        assert back.fingerprint() == ds.fingerprint()


class TestShuffle:
    def test_deterministic(self, rng):
        ds = LabeledDataset(rng.normal(size=(30, 2)), rng.integers(0, 2, 30))
        assert shuffle_dataset(ds, 4).fingerprint() == shuffle_dataset(ds, 4).fingerprint()

    def test_pairs_preserved(self, rng):
        ds = LabeledDataset(rng.normal(size=(30, 2)), rng.integers(0, 2, 30))
        sh = shuffle_dataset(ds, 1)
        before = sorted(zip(map(tuple, ds.X.tolist()), ds.y.tolist()))
        after = sorted(zip(map(tuple, sh.X.tolist()), sh.y.tolist()))
        assert before == after

    def test_all_orders_equally_likely(self):
        ds = LabeledDataset([[0.0], [1.0], [2.0]], [0, 0, 1])
        orders = {p: i for i, p in enumerate(itertools.permutations(range(3)))}
        counts = np.zeros(6)
        for seed in range(6000):
            counts[orders[tuple(int(v) for v in shuffle_dataset(ds, seed).X[:, 0])]] += 1
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_empty(self):
        with pytest.raises(ParameterError):
            shuffle_dataset(LabeledDataset(np.empty((0, 2)), np.empty(0)), 0)


class TestTwoCluster:
    def test_no_anomalies(self):
        spec = TwoClusterSpec(n=20_000, anomaly_rate=0.0, seed=3)
        ds = gen_two_cluster(spec)
        assert ds.y.sum() == 0
        u = np.arange(spec.n) / spec.n
        c = spec.drift(u)
        near = np.min(np.linalg.norm(ds.X[:, None, :] - c, axis=2), axis=1)
        assert near.max() < 6 * spec.cluster_sigma

    def test_anomaly_count_binomial(self):
        n, p = 1_000_000, 0.05
        ds = gen_two_cluster(TwoClusterSpec(n=n, anomaly_rate=p, seed=11))
        assert abs(ds.y.sum() - n * p) <= 3 * math.sqrt(n * p * (1 - p))

    def test_frozen_drift_mean(self):
        spec = TwoClusterSpec(n=100_000, drift=ArcDrift(sweep=0.0), seed=2)
        ds = gen_two_cluster(spec)
        normal = ds.X[ds.y == 0]
        # per-axis sd of a balanced two-point mixture plus noise
        sd = math.sqrt(spec.drift.radius ** 2 + spec.cluster_sigma ** 2)
        se = sd / math.sqrt(len(normal))
        assert np.all(np.abs(normal.mean(axis=0) - np.array(spec.drift.center)) <= 3 * se)

    def test_deterministic(self):
        a = gen_two_cluster(TwoClusterSpec(n=5000, seed=8))
        b = gen_two_cluster(TwoClusterSpec(n=5000, seed=8))
        assert a.fingerprint() == b.fingerprint()

    def test_anomalies_inside_bounds(self):
        spec = TwoClusterSpec(n=50_000, seed=1)
        ds = gen_two_cluster(spec)
        A = ds.X[ds.y == 1]
        assert np.all(A >= spec.low) and np.all(A <= spec.high)

    def test_paths_never_meet(self):
        d = ArcDrift()
        u = np.linspace(0, 1, 2001)
        a, b = d(u)[:, 0], d(u)[:, 1]
        gap = np.min(np.linalg.norm(a[:, None] - b[None], axis=2))
        assert gap > 6 * 0.5

    @pytest.mark.parametrize("kw", [dict(anomaly_rate=0.5), dict(anomaly_rate=-0.1), dict(cluster_sigma=0),
                                    dict(high=(15.0, 15.0)), dict(n=0)])
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            gen_two_cluster(TwoClusterSpec(**kw))
