"""Detector modes and the sliding-window driver.

Three modes share one model representation:

* ``incremental``: samples drawn from the departing batch are replaced by
  uniform draws from the arriving batch, and only the affected parts of the
  feature maps and running sum are recomputed.
* ``retrain``: the whole model is rebuilt on every new window.
* ``offline``: one model over the entire dataset.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, List, Optional

import numpy as np

from ._kernels import refresh_affected
from .exceptions import ParameterError, StateError
from .kernel import NO_SLOT, membership, nearest_from_sqdist, nearest_neighbour_sqdist, sqdist
from .model import (
    ModelState,
    as_points,
    histogram,
    init_model,
    scores_from_assignments,
    score_many,
    window_scores,
)

log = logging.getLogger(__name__)

MODES = ("incremental", "retrain", "offline")
MODE_ALIASES = {"idks": "incremental", "idk-s": "incremental"}


@dataclass(frozen=True)
class StreamConfig:
    """Parameters of one streaming run.

    ``retrain_interval`` only matters in ``retrain`` mode: the model is rebuilt
    every that many slides, and arrivals in between are scored against the
    last rebuilt model.
    """

    omega: int = 2048
    step: int = 100
    psi: int = 4
    t: int = 100
    seed: int = 0
    mode: str = "incremental"
    retrain_interval: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", MODE_ALIASES.get(self.mode, self.mode))
        self.validate()

    def validate(self):
        if self.mode not in MODES:
            raise ParameterError("mode must be one of %s, got %r" % (", ".join(MODES), self.mode))
        if not 2 <= self.psi < self.omega:
            raise ParameterError(
                "psi must satisfy 2 <= psi < omega (omega=%d), got psi=%r" % (self.omega, self.psi))
        if not 1 <= self.step <= self.omega:
            raise ParameterError(
                "step must satisfy 1 <= step <= omega (omega=%d), got %r" % (self.omega, self.step))
        if self.t < 1:
            raise ParameterError("t must be >= 1, got %r" % (self.t,))
        if self.retrain_interval < 1:
            raise ParameterError("retrain_interval must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScoreRecord:
    stream_index: int
    normal_score: float
    label: Optional[int]
    scored_at_step: int


@dataclass
class UpdateStats:
    replaced: int
    affected_partitionings: int
    wall_time: float


def uniform_replacements(rng: np.random.Generator, k: np.ndarray, batch: int) -> np.ndarray:
    """Offsets into the arriving batch for each expired slot.

    ``k[j]`` slots expired in the ``j``-th affected partitioning; each gets
    ``k[j]`` distinct offsets drawn uniformly without replacement from
    ``range(batch)``, independently across partitionings. The first ``k[j]``
    entries of a uniformly random permutation are such a draw.
    """
    perm = rng.random((len(k), batch)).argsort(axis=1)
    take = np.arange(batch) < np.asarray(k)[:, None]
    return perm[take]


def newest_replacements(rng: np.random.Generator, k: np.ndarray, batch: int) -> np.ndarray:
    """Deliberately biased draw: always the newest ``k[j]`` arrivals.

    Only used as a negative control for the sampling-uniformity check.
    """
    return np.concatenate([np.arange(batch - int(kj), batch) for kj in k])


def _check_arrival(m: ModelState, arrived, first_index):
    X = as_points(arrived, m.d)
    n = X.shape[0]
    if n < 1 or n > m.omega:
        raise StateError("batch of %d rows does not fit a window of %d" % (n, m.omega))
    if first_index is not None and first_index != m.window_end:
        raise StateError(
            "arrived batch starts at stream index %d, window ends at %d" % (first_index, m.window_end))
    return X


def update_incremental(m: ModelState, arrived, rng: np.random.Generator, first_index=None,
                       draw: Callable = uniform_replacements, compiled: Optional[bool] = None):
    """Slide the window by ``len(arrived)`` rows, updating ``m`` in place.

    The departing batch is implicitly the oldest ``len(arrived)`` window rows;
    the arrivals take over their ring-buffer positions.

    Surviving rows are only touched in partitionings that lost a sample. There
    a row keeps its nearest sample unless that sample was replaced (then its
    distances to all samples are rescanned) or a new sample is at least as
    close; every radius is refreshed and ball membership rechecked.

    ``compiled`` forces (True) or disables (False) the numba kernel; by
    default it is used when available.

    Returns
    -------
    (ModelState, UpdateStats)
        ``m`` itself and the replacement statistics of this slide.
    """
    t0 = time.perf_counter()
    X = _check_arrival(m, arrived, first_index)
    if m.dist is None:
        raise StateError("incremental updates need a model built with cache=True")
    l = X.shape[0]
    omega, psi = m.omega, m.psi
    ens = m.ensemble
    old_start = m.window_start
    new_start = old_start + l
    segments = list(m.segments(old_start, l))

    # departed rows leave the running sum
    m.counts -= histogram(m.batch_assignments(old_start, l), psi)
    for buf, bat in segments:
        m.buffer[buf] = X[bat]
    m.window_start = new_start

    # step 1: swap out samples drawn from the departed batch
    expired = ens.sources < new_start
    rows, cols = np.nonzero(expired)
    affected = np.unique(rows)
    if rows.size:
        k = np.bincount(rows)[affected]
        offsets = draw(rng, k, l)
        new_pts = X[offsets]
        ens.points[rows, cols] = new_pts
        ens.sources[rows, cols] = old_start + omega + offsets
        ens.radii_sq[affected] = nearest_neighbour_sqdist(ens.points[affected])
        m.dist[rows, cols, :] = sqdist(new_pts[:, None, :], m.buffer[None, :, :])
    arrived_dist = sqdist(ens.points[:, :, None, :], X[None, None, :, :])
    for buf, bat in segments:
        m.dist[:, :, buf] = arrived_dist[:, :, bat]

    # step 2: survivors in affected partitionings, then arrivals everywhere
    if affected.size:
        refresh_affected(m.dist, m.nearest, m.best, m.assign_buf, m.counts, ens.radii_sq,
                         expired, affected, rows, cols, old_start % omega, l, use_numba=compiled)
    near, best = nearest_from_sqdist(arrived_dist)
    arrived_assign = membership(near, best, ens.radii_sq)
    for buf, bat in segments:
        m.nearest[:, buf] = near[:, bat]
        m.best[:, buf] = best[:, bat]
        m.assign_buf[:, buf] = arrived_assign[:, bat]

    # step 3: arrivals join the running sum
    m.counts += histogram(arrived_assign, psi)
    return m, UpdateStats(int(rows.size), int(affected.size), time.perf_counter() - t0)


def update_retrain(m: ModelState, arrived, rng: np.random.Generator, first_index=None) -> ModelState:
    """Slide the window and rebuild the model from scratch on the new window."""
    X = _check_arrival(m, arrived, first_index)
    l = X.shape[0]
    window = np.concatenate([m.window[l:], X])
    return init_model(window, m.psi, m.t, rng, window_start=m.window_start + l)


def offline_scores(X, psi: int, t: int, rng: np.random.Generator) -> np.ndarray:
    X = as_points(X)
    m = init_model(X, psi, t, rng, cache=False)
    return window_scores(m)


def offline_detect(X, labels=None, psi: int = 4, t: int = 100,
                   rng: Optional[np.random.Generator] = None) -> List[ScoreRecord]:
    """Score a whole dataset against one model built on all of it."""
    rng = np.random.default_rng() if rng is None else rng
    scores = offline_scores(X, psi, t, rng)
    labels = [None] * len(scores) if labels is None else [int(v) for v in labels]
    return [ScoreRecord(i, float(s), lab, 0) for i, (s, lab) in enumerate(zip(scores, labels))]


@dataclass
class StreamResult:
    """Column-wise output of :func:`run_stream`."""

    stream_index: np.ndarray
    normal_score: np.ndarray
    scored_at_step: np.ndarray
    label: Optional[np.ndarray]
    config: StreamConfig
    total_time: float = 0.0
    update_times: List[float] = field(default_factory=list)
    replaced: List[int] = field(default_factory=list)
    affected: List[int] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def __len__(self):
        return len(self.stream_index)

    @property
    def anomaly_score(self) -> np.ndarray:
        return -self.normal_score

    def records(self) -> Iterator[ScoreRecord]:
        for i in range(len(self)):
            lab = None if self.label is None else int(self.label[i])
            yield ScoreRecord(int(self.stream_index[i]), float(self.normal_score[i]), lab,
                              int(self.scored_at_step[i]))

    def metrics(self) -> dict:
        ut = np.asarray(self.update_times, dtype=float)
        out = {
            "mode": self.config.mode,
            "config": self.config.to_dict(),
            "n": int(len(self)),
            "updates": int(ut.size),
            "total_time": self.total_time,
            "update_time_mean": float(ut.mean()) if ut.size else None,
            "update_time_median": float(np.median(ut)) if ut.size else None,
            "update_time_p90": float(np.percentile(ut, 90)) if ut.size else None,
            "update_time_p99": float(np.percentile(ut, 99)) if ut.size else None,
            "replaced_mean": float(np.mean(self.replaced)) if self.replaced else None,
            "replaced_max": int(np.max(self.replaced)) if self.replaced else None,
            "affected_mean": float(np.mean(self.affected)) if self.affected else None,
            "warnings": list(self.warnings),
        }
        if self.label is not None and 0 < self.label.sum() < len(self.label):
            from .evaluation import roc_auc

            out["auc"] = roc_auc(self.anomaly_score, self.label)
        else:
            out["auc"] = None
        return out


def run_stream(X, labels=None, cfg: StreamConfig = StreamConfig(), check: bool = False) -> StreamResult:
    """Score every instance of a stream exactly once.

    The first ``omega`` instances build the initial model and are scored
    against it (``scored_at_step == 0``). After that the stream is consumed in
    batches of ``cfg.step``; each batch updates the model first and is then
    scored against the updated model. A short final batch is processed as is.

    With ``check=True`` the model invariants are asserted after every update.
    """
    t_start = time.perf_counter()
    X = as_points(X)
    n = X.shape[0]
    lab = None if labels is None else np.asarray(labels, dtype=np.int64)
    if lab is not None and lab.shape != (n,):
        raise ParameterError("need one label per instance")
    rng = np.random.default_rng(cfg.seed)
    scores = np.empty(n, dtype=np.float64)
    steps = np.zeros(n, dtype=np.int64)
    result = StreamResult(np.arange(n, dtype=np.int64), scores, steps, lab, cfg)

    if cfg.mode == "offline" or n < cfg.omega:
        if cfg.mode != "offline":
            msg = "stream of %d instances is shorter than omega=%d; scored offline" % (n, cfg.omega)
            log.warning(msg)
            result.warnings.append(msg)
        scores[:] = offline_scores(X, cfg.psi, cfg.t, rng)
        result.total_time = time.perf_counter() - t_start
        return result

    incremental = cfg.mode == "incremental"
    m = init_model(X[:cfg.omega], cfg.psi, cfg.t, rng, cache=incremental)
    scores[:cfg.omega] = window_scores(m)
    if check:
        from .model import check_invariants

        check_invariants(m)

    i, s = cfg.omega, 1
    while i < n:
        l = min(cfg.step, n - i)
        batch = X[i:i + l]
        t0 = time.perf_counter()
        if incremental:
            m, st = update_incremental(m, batch, rng, first_index=i)
            result.replaced.append(st.replaced)
            result.affected.append(st.affected_partitionings)
            result.update_times.append(time.perf_counter() - t0)
            scores[i:i + l] = scores_from_assignments(m.batch_assignments(i, l), m.counts, m.omega)
        elif cfg.retrain_interval == 1:
            m = update_retrain(m, batch, rng, first_index=i)
            result.update_times.append(time.perf_counter() - t0)
            scores[i:i + l] = scores_from_assignments(m.batch_assignments(i, l), m.counts, m.omega)
        else:
            # stale model between rebuilds; arrivals scored against the last one
            if s % cfg.retrain_interval == 0:
                m = init_model(X[i + l - cfg.omega:i + l], cfg.psi, cfg.t, rng,
                               window_start=i + l - cfg.omega, cache=False)
                result.update_times.append(time.perf_counter() - t0)
            scores[i:i + l] = score_many(batch, m)
        if check and (incremental or cfg.retrain_interval == 1):
            check_invariants(m)
        steps[i:i + l] = s
        i += l
        s += 1
    result.total_time = time.perf_counter() - t_start
    return result
