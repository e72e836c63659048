"""Model state over a sliding window: feature maps, running sums, scoring.

The feature map of a window row is kept in compact form: one slot index per
partitioning (or ``NO_SLOT``), which is isomorphic to the one-hot ``psi*t``
bit vector. The running sum of all window feature vectors is a ``(t, psi)``
integer count table; division by the window size only happens when a score
is produced.

Window rows live in a circular buffer: the row with stream index ``i`` sits
at buffer position ``i % omega``. Arrays exposed through properties are
rotated back into stream order.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .exceptions import ParameterError
from .kernel import (
    NO_SLOT,
    PartitionEnsemble,
    assign_many,
    membership,
    nearest_from_sqdist,
    nearest_neighbour_sqdist,
    sqdist,
)

SNAPSHOT_VERSION = 1


class ModelState:
    """Ensemble, assignment matrix, and count table for one window.

    Instances are built with :func:`init_model` and advanced by the updaters
    in :mod:`idks.streaming`; the constructor does no validation.
    """

    def __init__(self, buffer, window_start, ensemble, assign_buf, counts,
                 dist=None, nearest=None, best=None):
        self.buffer = buffer  # (omega, d) circular
        self.window_start = int(window_start)
        self.ensemble = ensemble
        self.assign_buf = assign_buf  # (t, omega) circular columns, NO_SLOT = unassigned
        self.counts = counts  # (t, psi) int64
        # (t, psi, omega) cached squared distances, sample -> row, circular rows
        self.dist = dist
        # (t, omega) nearest slot per row and its squared distance, same layout
        self.nearest = nearest
        self.best = best

    @property
    def omega(self) -> int:
        return self.buffer.shape[0]

    @property
    def d(self) -> int:
        return self.buffer.shape[1]

    @property
    def t(self) -> int:
        return self.ensemble.t

    @property
    def psi(self) -> int:
        return self.ensemble.psi

    @property
    def window_end(self) -> int:
        """Stream index one past the newest window row."""
        return self.window_start + self.omega

    def _roll(self, arr, axis=0):
        shift = self.window_start % self.omega
        return arr if shift == 0 else np.roll(arr, -shift, axis=axis)

    @property
    def window(self) -> np.ndarray:
        return self._roll(self.buffer)

    @property
    def window_index(self) -> np.ndarray:
        return np.arange(self.window_start, self.window_end, dtype=np.int64)

    @property
    def assignments(self) -> np.ndarray:
        """``(omega, t)`` assignment matrix in stream order."""
        return self._roll(self.assign_buf, axis=1).T

    def positions(self, stream_index) -> np.ndarray:
        return np.asarray(stream_index, dtype=np.int64) % self.omega

    def segments(self, first: int, count: int):
        """Buffer slices holding stream indices ``first .. first+count-1``.

        Yields ``(buffer_slice, batch_slice)`` pairs; at most two because the
        range wraps around the ring at most once.
        """
        lo = first % self.omega
        head = min(count, self.omega - lo)
        yield slice(lo, lo + head), slice(0, head)
        if head < count:
            yield slice(0, count - head), slice(head, count)

    def batch_assignments(self, first: int, count: int) -> np.ndarray:
        """``(t, count)`` assignment block for a contiguous run of stream indices."""
        return np.concatenate(
            [self.assign_buf[:, buf] for buf, _ in self.segments(first, count)], axis=1)

    def copy(self) -> "ModelState":
        return ModelState(
            self.buffer.copy(),
            self.window_start,
            self.ensemble.copy(),
            self.assign_buf.copy(),
            self.counts.copy(),
            None if self.dist is None else self.dist.copy(),
            None if self.nearest is None else self.nearest.copy(),
            None if self.best is None else self.best.copy(),
        )

    def __repr__(self):
        return "ModelState(omega=%d, psi=%d, t=%d, d=%d, window_start=%d)" % (
            self.omega, self.psi, self.t, self.d, self.window_start)


def as_points(X, d: Optional[int] = None) -> np.ndarray:
    """Validate a block of points: 2-D, finite, and of dimension ``d`` if given."""
    X = np.array(X, dtype=np.float64, ndmin=2)
    if X.ndim != 2:
        raise ParameterError("expected a 2-D array of points, got shape %s" % (X.shape,))
    if d is not None and X.shape[1] != d:
        raise ParameterError("points have d=%d, expected d=%d" % (X.shape[1], d))
    if not np.all(np.isfinite(X)):
        raise ParameterError("points must have finite coordinates")
    return X


def draw_sample_rows(n: int, psi: int, t: int, rng: np.random.Generator) -> np.ndarray:
    """``t`` independent uniform ``psi``-subsets of ``range(n)``, shape ``(t, psi)``."""
    if psi < 2 or psi > n:
        raise ParameterError("psi must satisfy 2 <= psi <= window size (%d), got %r" % (n, psi))
    if t < 1:
        raise ParameterError("t must be >= 1, got %r" % (t,))
    out = np.empty((t, psi), dtype=np.int64)
    for j in range(t):
        out[j] = rng.choice(n, size=psi, replace=False)
    return out


def histogram(assign: np.ndarray, psi: int) -> np.ndarray:
    """Per-partitioning slot counts of a ``(t, n)`` assignment block."""
    assign = np.asarray(assign)
    t = assign.shape[0]
    # NO_SLOT lands in a padding bin (-1 % (psi + 1) == psi) that is dropped
    flat = (assign % (psi + 1)) + (np.arange(t, dtype=np.int64) * (psi + 1))[:, None]
    counts = np.bincount(flat.reshape(-1), minlength=t * (psi + 1)).reshape(t, psi + 1)
    return counts[:, :psi].astype(np.int64)


def init_model(window, psi: int, t: int, rng: Optional[np.random.Generator] = None,
               window_start: int = 0, samples=None, cache: bool = True) -> ModelState:
    """Build the initial model on a window.

    Parameters
    ----------
    window : (omega, d) array_like
        Window rows in stream order; row ``r`` has stream index
        ``window_start + r``.
    psi, t : int
        Samples per partitioning and number of partitionings.
    rng : numpy.random.Generator
        Draws the sample sets. Not needed when ``samples`` is given.
    samples : (t, psi) array_like of int, optional
        Pin the sample sets to these stream indices (slot order kept).
    cache : bool
        Keep the ``(t, psi, omega)`` distance cache the incremental updater
        needs. Offline scoring of large datasets turns it off.
    """
    X = as_points(window)
    omega = X.shape[0]
    if t < 1:
        raise ParameterError("t must be >= 1, got %r" % (t,))
    if psi < 2 or psi > omega:
        raise ParameterError("psi must satisfy 2 <= psi <= window size (%d), got %r" % (omega, psi))
    if samples is None:
        if rng is None:
            raise ParameterError("an rng is required unless samples are pinned")
        rows = draw_sample_rows(omega, psi, t, rng)
    else:
        rows = np.array(samples, dtype=np.int64) - window_start
        if rows.shape != (t, psi):
            raise ParameterError("pinned samples must have shape (%d, %d)" % (t, psi))
        if rows.min() < 0 or rows.max() >= omega:
            raise ParameterError("pinned sample outside the window")
        if any(len(np.unique(r)) != psi for r in rows):
            raise ParameterError("pinned sample indices must be distinct per partitioning")
    points = X[rows]
    ensemble = PartitionEnsemble(points, rows + window_start, nearest_neighbour_sqdist(points))

    # circular layout: stream index i at position i % omega
    pos = (window_start + np.arange(omega)) % omega
    buffer = np.empty_like(X)
    buffer[pos] = X
    if cache:
        dist = sqdist(points[:, :, None, :], buffer[None, None, :, :])
        nearest, best = nearest_from_sqdist(dist)
        assign_buf = membership(nearest, best, ensemble.radii_sq)
        counts = histogram(assign_buf, psi)
        return ModelState(buffer, window_start, ensemble, assign_buf, counts, dist, nearest, best)
    assign_buf = np.ascontiguousarray(assign_many(buffer, ensemble).T)
    return ModelState(buffer, window_start, ensemble, assign_buf, histogram(assign_buf, psi))


def scores_from_assignments(assign: np.ndarray, counts: np.ndarray, omega: int) -> np.ndarray:
    """Normal scores of points whose ``(t, n)`` assignments are known.

    ``(1/t) * sum_j counts[j, a_j] / omega`` with unassigned partitionings
    contributing zero. The integer numerator is exact, so the only rounding
    is the final division.
    """
    t, psi = counts.shape
    assign = np.asarray(assign)
    # pad each partitioning's counts with a trailing zero for NO_SLOT (-1)
    padded = np.concatenate([counts, np.zeros((t, 1), dtype=counts.dtype)], axis=1)
    flat = (assign % (psi + 1)) + (np.arange(t, dtype=np.int64) * (psi + 1))[:, None]
    total = padded.reshape(-1)[flat].sum(axis=0)
    return total / float(t * omega)


def score_many(X, m: ModelState) -> np.ndarray:
    """Normal scores in ``[0, 1]`` for arbitrary points (higher = more normal)."""
    X = as_points(X, m.d)
    return scores_from_assignments(assign_many(X, m.ensemble).T, m.counts, m.omega)


def score(x, m: ModelState) -> float:
    """Normal score of a single point against the model's feature mean map."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ParameterError("expected a single point")
    return float(score_many(x[None, :], m)[0])


def window_scores(m: ModelState) -> np.ndarray:
    """Scores of all window rows in stream order, read off the assignment matrix."""
    return scores_from_assignments(m.assignments.T, m.counts, m.omega)


def mean_map(X, ensemble: PartitionEnsemble) -> np.ndarray:
    """Kernel mean map of a point set as a ``(t, psi)`` array."""
    X = as_points(X, ensemble.d)
    if X.shape[0] == 0:
        raise ParameterError("point set is empty")
    return histogram(assign_many(X, ensemble).T, ensemble.psi) / X.shape[0]


def idk_similarity(X, Y, ensemble: PartitionEnsemble) -> float:
    """Distributional similarity of two point sets, in ``[0, 1]``.

    The inner product of the two kernel mean maps, divided by ``t``.
    """
    a = mean_map(X, ensemble)
    b = mean_map(Y, ensemble)
    return float(np.sum(a * b) / ensemble.t)


def recount(m: ModelState) -> np.ndarray:
    """Count table recomputed from scratch off the assignment matrix."""
    return histogram(m.assign_buf, m.psi)


def check_invariants(m: ModelState) -> None:
    """Raise ``AssertionError`` if any structural invariant is broken."""
    src = m.ensemble.sources
    assert src.min() >= m.window_start and src.max() < m.window_end, "sample outside window"
    srt = np.sort(src, axis=1)
    assert np.all(srt[:, 1:] != srt[:, :-1]), "duplicate sample within a partitioning"
    rows = m.positions(src)
    assert np.array_equal(m.buffer[rows], m.ensemble.points), "sample point does not match window row"
    assert np.array_equal(m.ensemble.radii_sq, nearest_neighbour_sqdist(m.ensemble.points))
    assert np.array_equal(recount(m), m.counts), "running sum out of balance"


def save_snapshot(m: ModelState, path) -> None:
    """Write the model to a ``.npz`` archive that round-trips bit-exactly."""
    meta = {
        "format": "idks-model",
        "version": SNAPSHOT_VERSION,
        "d": m.d,
        "omega": m.omega,
        "psi": m.psi,
        "t": m.t,
        "window_start": m.window_start,
    }
    with open(path, "wb") as fh:
        np.savez(
            fh,
            meta=np.array(json.dumps(meta, sort_keys=True)),
            window=m.window,
            sample_points=m.ensemble.points,
            sample_sources=m.ensemble.sources,
            radii_sq=m.ensemble.radii_sq,
            assignments=m.assignments,
            counts=m.counts,
        )


def load_snapshot(path) -> ModelState:
    """Inverse of :func:`save_snapshot`; the distance cache is rebuilt."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != "idks-model":
            raise ParameterError("not a model snapshot: %r" % (path,))
        if meta["version"] != SNAPSHOT_VERSION:
            raise ParameterError("unsupported snapshot version %r" % (meta["version"],))
        window = z["window"]
        ensemble = PartitionEnsemble(z["sample_points"], z["sample_sources"], z["radii_sq"])
        assignments = z["assignments"]
        counts = z["counts"]
    start = int(meta["window_start"])
    omega = window.shape[0]
    pos = (start + np.arange(omega)) % omega
    buffer = np.empty_like(window)
    buffer[pos] = window
    assign_buf = np.empty((assignments.shape[1], omega), dtype=np.int64)
    assign_buf[:, pos] = assignments.T
    dist = sqdist(ensemble.points[:, :, None, :], buffer[None, None, :, :])
    nearest, best = nearest_from_sqdist(dist)
    return ModelState(buffer, start, ensemble, assign_buf, counts, dist, nearest, best)
