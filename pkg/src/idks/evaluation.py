"""Metrics, runtime benchmarks, the sampling-uniformity check, and psi sweeps."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy import stats

from .exceptions import MetricError, ParameterError
from .model import init_model
from .streaming import (
    StreamConfig,
    StreamResult,
    newest_replacements,
    run_stream,
    uniform_replacements,
    update_incremental,
)


def roc_auc(anomaly_scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Ties contribute one half (midranks). Higher scores must mean "more
    anomalous"; pass negated normal scores.
    """
    s = np.asarray(anomaly_scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise MetricError("scores and labels must be 1-D and of equal length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int((y == 0).sum())
    if n_pos + n_neg != len(y):
        raise MetricError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise MetricError("ROC AUC is undefined with %d positives and %d negatives" % (n_pos, n_neg))
    ranks = stats.rankdata(s, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class AucPoint:
    center: int
    auc: float
    n_pos: int
    n_neg: int


def sliding_auc(stream_index, normal_score, labels, omega: int,
                stride: int = 100, start: Optional[int] = None) -> List[AucPoint]:
    """AUC over the closed interval ``[T - omega, T + omega]`` for each centre ``T``.

    Centres run from ``start`` (default: the first index with a full
    interval) in steps of ``stride`` while the interval fits in the stream.
    Intervals lacking either class are skipped.
    """
    if labels is None:
        raise MetricError("sliding AUC needs labels")
    idx = np.asarray(stream_index, dtype=np.int64)
    s = -np.asarray(normal_score, dtype=np.float64)
    y = np.asarray(labels)
    if len(idx) and np.any(np.diff(idx) <= 0):
        raise MetricError("records must be sorted by stream index")
    if stride < 1:
        raise ParameterError("stride must be >= 1")
    if len(idx) == 0:
        return []
    first, last = int(idx[0]), int(idx[-1])
    T = first + omega if start is None else max(start, first + omega)
    out = []
    while T + omega <= last:
        lo = np.searchsorted(idx, T - omega, side="left")
        hi = np.searchsorted(idx, T + omega, side="right")
        yy = y[lo:hi]
        n_pos = int((yy == 1).sum())
        n_neg = int((yy == 0).sum())
        if n_pos and n_neg:
            out.append(AucPoint(T, roc_auc(s[lo:hi], yy), n_pos, n_neg))
        T += stride
    return out


@dataclass
class UniformityResult:
    chi_square: float
    dof: int
    p_value: float
    passed: bool
    observed: np.ndarray
    expected: float

    def summary(self) -> str:
        return "chi2=%.3f dof=%d p=%.4g -> %s" % (
            self.chi_square, self.dof, self.p_value, "PASS" if self.passed else "FAIL")


def _subset_codes(positions: np.ndarray, omega: int) -> np.ndarray:
    """Rank of each sorted ``psi``-subset of ``range(omega)`` in colexicographic order."""
    srt = np.sort(positions, axis=1)
    code = np.zeros(len(srt), dtype=np.int64)
    for i in range(srt.shape[1]):
        code += np.array([math.comb(int(v), i + 1) for v in range(omega)], dtype=np.int64)[srt[:, i]]
    return code


def uniformity_test(omega: int = 6, psi: int = 2, step: int = 2, slides: int = 3,
                    trials: int = 150_000, seed: int = 0, alpha: float = 1e-3,
                    draw: Callable = uniform_replacements) -> UniformityResult:
    """Chi-square test that incremental updates keep sample sets uniform.

    Runs ``trials`` independent single-partitioning detectors through
    ``slides`` updates on a synthetic stream, records each final sample set as
    window positions, and compares the histogram over all ``C(omega, psi)``
    subsets with the uniform law. Partitionings never interact, so the trials
    run as the partitionings of one ensemble with ``t = trials``.
    """
    n_subsets = math.comb(omega, psi)
    if not 2 <= psi < omega:
        raise ParameterError("need 2 <= psi < omega")
    if not 1 <= step <= omega:
        raise ParameterError("need 1 <= step <= omega")
    if n_subsets > 10_000:
        raise ParameterError("C(%d, %d) = %d subsets is too many to enumerate" % (omega, psi, n_subsets))
    if trials < 100 * n_subsets:
        raise ParameterError(
            "trials must be >= 100 * C(omega, psi) = %d, got %d" % (100 * n_subsets, trials))
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(omega + slides * step, 2))
    m = init_model(X[:omega], psi, trials, rng)
    for s in range(slides):
        lo = omega + s * step
        m, _ = update_incremental(m, X[lo:lo + step], rng, first_index=lo, draw=draw)
    observed = np.bincount(_subset_codes(m.ensemble.sources - m.window_start, omega),
                           minlength=n_subsets)
    expected = trials / n_subsets
    chi2, p = stats.chisquare(observed)
    return UniformityResult(float(chi2), n_subsets - 1, float(p), bool(p > alpha), observed, expected)


SABOTAGE = {"none": uniform_replacements, "newest-only": newest_replacements}


def oracle_equivalence(X, cfg: StreamConfig, max_updates: Optional[int] = None) -> dict:
    """Check incremental updates against rebuilds with the same sample sets.

    After every update the model is rebuilt from scratch on the current
    window with its sample sets pinned. Assignments and counts must match
    exactly and window scores to a relative ``1e-12``.
    """
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    m = init_model(X[:cfg.omega], cfg.psi, cfg.t, rng)
    i, checked, worst = cfg.omega, 0, 0.0
    mismatches = []
    from .model import window_scores

    while i < len(X) and (max_updates is None or checked < max_updates):
        l = min(cfg.step, len(X) - i)
        m, _ = update_incremental(m, X[i:i + l], rng, first_index=i)
        i += l
        ref = init_model(m.window, cfg.psi, cfg.t, window_start=m.window_start,
                         samples=m.ensemble.sources)
        a, b = window_scores(m), window_scores(ref)
        rel = float(np.max(np.abs(a - b) / np.maximum(np.abs(b), np.finfo(float).tiny)))
        worst = max(worst, rel)
        if not np.array_equal(m.assignments, ref.assignments):
            mismatches.append((checked, "assignments"))
        if not np.array_equal(m.counts, ref.counts):
            mismatches.append((checked, "counts"))
        if rel > 1e-12:
            mismatches.append((checked, "scores"))
        checked += 1
    return {"updates": checked, "mismatches": mismatches, "max_rel_score_diff": worst,
            "passed": not mismatches}


@dataclass
class BenchRow:
    mode: str
    omega: int
    step: int
    psi: int
    t: int
    seed: int
    mean_update_time: float
    median_update_time: float
    total_time: float
    auc: Optional[float]
    updates: int

    def to_dict(self) -> dict:
        return asdict(self)


def bench_runtime(grid: Sequence[StreamConfig], X, y=None, repeats: int = 1,
                  max_updates: Optional[int] = None) -> List[BenchRow]:
    """Time each configuration over ``repeats`` seeds.

    Returns one row per (config, seed) with per-update mean and median
    times; the initial window build is excluded from the update times.
    ``max_updates`` truncates the stream to ``omega + max_updates * step``.
    Use :func:`median_rows` to collapse seeds.
    """
    rows = []
    for cfg in grid:
        n = len(X) if max_updates is None else min(len(X), cfg.omega + max_updates * cfg.step)
        for r in range(repeats):
            c = replace(cfg, seed=cfg.seed + r)
            res = run_stream(X[:n], None if y is None else y[:n], c)
            ut = np.asarray(res.update_times)
            auc = None
            if y is not None and 0 < y[:n].sum() < n:
                auc = roc_auc(res.anomaly_score, y[:n])
            rows.append(BenchRow(c.mode, c.omega, c.step, c.psi, c.t, c.seed,
                                 float(ut.mean()) if ut.size else float("nan"),
                                 float(np.median(ut)) if ut.size else float("nan"),
                                 res.total_time, auc, int(ut.size)))
    return rows


def median_rows(rows: Sequence[BenchRow]) -> List[BenchRow]:
    """Collapse per-seed rows into one row of medians per configuration."""
    groups = {}
    for r in rows:
        groups.setdefault((r.mode, r.omega, r.step, r.psi, r.t), []).append(r)
    out = []
    for (mode, omega, step, psi, t), rs in groups.items():
        aucs = [r.auc for r in rs if r.auc is not None]
        out.append(BenchRow(
            mode, omega, step, psi, t, -1,
            float(np.median([r.mean_update_time for r in rs])),
            float(np.median([r.median_update_time for r in rs])),
            float(np.median([r.total_time for r in rs])),
            float(np.median(aucs)) if aucs else None,
            int(np.median([r.updates for r in rs])),
        ))
    return out


@dataclass
class SweepRow:
    psi: int
    auc: float
    time: float


def psi_sweep(X, y, template: StreamConfig, psi_values: Sequence[int] = (2, 4, 8, 16, 32, 64)):
    """Run the full stream once per ``psi``; return rows and the best ``psi``.

    The best ``psi`` maximises AUC, ties going to the smaller value.
    """
    if not psi_values:
        raise ParameterError("psi_values is empty")
    rows = []
    for psi in psi_values:
        cfg = replace(template, psi=int(psi))
        res = run_stream(X, y, cfg)
        rows.append(SweepRow(int(psi), roc_auc(res.anomaly_score, y), res.total_time))
    best = min(rows, key=lambda r: (-r.auc, r.psi))
    return rows, best.psi
