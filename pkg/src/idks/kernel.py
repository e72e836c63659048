"""Hypersphere partitionings and the Isolation Kernel feature map.

A partitioning is ``psi`` points sampled from a window. Each sample is the
centre of a ball whose radius is the distance to its nearest co-sampled
neighbour. A point maps to the slot of its nearest sample when it lies
strictly inside that sample's ball, and to no slot otherwise.

All distances are handled as squared Euclidean distances internally; the
per-element arithmetic is identical no matter which array shape it is
evaluated in, so cached and freshly computed distances agree bit for bit.
Comparisons are therefore exact only while squared coordinate gaps stay in
the normal floating point range (gaps roughly between 1e-154 and 1e154).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import ParameterError

NO_SLOT = -1


def sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance between broadcastable point arrays.

    The last axis of both inputs is the coordinate axis. Coordinates are
    accumulated left to right so every element is computed by the same
    sequence of floating point operations regardless of broadcasting.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = None
    for k in range(a.shape[-1]):
        diff = a[..., k] - b[..., k]
        if out is None:
            out = diff * diff
        else:
            out += diff * diff
    return out


def nearest_neighbour_sqdist(points: np.ndarray) -> np.ndarray:
    """Squared distance from each sample to its nearest other sample.

    ``points`` has shape ``(..., psi, d)``; the result has shape ``(..., psi)``.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[-2] < 2:
        raise ParameterError("a radius needs at least 2 samples, got %d" % pts.shape[-2])
    pair = sqdist(pts[..., :, None, :], pts[..., None, :, :])
    idx = np.arange(pts.shape[-2])
    pair[..., idx, idx] = np.inf
    return pair.min(axis=-1)


def compute_radii(points) -> np.ndarray:
    """Euclidean distance from each sample point to its nearest other sample.

    >>> compute_radii([[0.0], [1.0], [4.0]]).tolist()
    [1.0, 1.0, 3.0]
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise ParameterError("expected a (psi, d) array of sample points")
    return np.sqrt(nearest_neighbour_sqdist(pts))


def nearest_from_sqdist(dist: np.ndarray):
    """Nearest sample index (lowest on ties) and its squared distance.

    ``dist`` has shape ``(..., psi, n)``; both results have shape ``(..., n)``.
    """
    best = dist[..., 0, :].copy()
    nearest = np.zeros(best.shape, dtype=np.int64)
    # branchless scan: boolean-masked writes are far slower than ufuncs here
    for k in range(1, dist.shape[-2]):
        dk = dist[..., k, :]
        closer = dk < best
        nearest += closer * (k - nearest)
        np.minimum(best, dk, out=best)
    return nearest, best


def membership(nearest: np.ndarray, best: np.ndarray, radii_sq: np.ndarray) -> np.ndarray:
    """Turn nearest-sample results into slot assignments.

    ``nearest`` and ``best`` have shape ``(..., n)``, ``radii_sq`` has shape
    ``(..., psi)`` with the same leading axes.
    """
    psi = radii_sq.shape[-1]
    lead = nearest.shape[:-1]
    rows = int(np.prod(lead, dtype=np.int64))
    flat = nearest.reshape(rows, -1) + (np.arange(rows, dtype=np.int64) * psi)[:, None]
    rad = np.ascontiguousarray(radii_sq).reshape(-1)[flat].reshape(nearest.shape)
    inside = best < rad
    return (nearest + 1) * inside - 1


def assign_from_sqdist(dist: np.ndarray, radii_sq: np.ndarray) -> np.ndarray:
    """Slot assignment from precomputed squared distances.

    Parameters
    ----------
    dist : array of shape (..., psi, n)
        Squared distance from each sample to each of ``n`` points.
    radii_sq : array of shape (..., psi)
        Squared ball radii, matching the leading axes of ``dist``.

    Returns
    -------
    array of shape (..., n)
        Index of the nearest sample (lowest index on ties) when the point is
        strictly inside its ball, else ``NO_SLOT``.
    """
    nearest, best = nearest_from_sqdist(dist)
    return membership(nearest, best, radii_sq)


@dataclass(frozen=True)
class Partitioning:
    """One random hypersphere partitioning of feature space.

    Attributes
    ----------
    points : (psi, d) float array
        Copies of the sampled points; slot ``k`` is row ``k``.
    sources : (psi,) int array
        Stream index each sample was drawn from.
    radii_sq : (psi,) float array
        Squared ball radii.
    """

    points: np.ndarray
    sources: np.ndarray
    radii_sq: np.ndarray

    @property
    def psi(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def radii(self) -> np.ndarray:
        return np.sqrt(self.radii_sq)

    @classmethod
    def from_points(cls, points, sources) -> "Partitioning":
        pts = np.array(points, dtype=np.float64, ndmin=2)
        src = np.array(sources, dtype=np.int64)
        if len(src) != len(pts):
            raise ParameterError("need one source index per sample point")
        if len(np.unique(src)) != len(src):
            raise ParameterError("sample source indices must be distinct")
        return cls(pts, src, nearest_neighbour_sqdist(pts))


@dataclass
class PartitionEnsemble:
    """``t`` partitionings stored as stacked arrays.

    ``points`` is ``(t, psi, d)``, ``sources`` and ``radii_sq`` are ``(t, psi)``.
    Indexing returns an independent :class:`Partitioning` copy.
    """

    points: np.ndarray
    sources: np.ndarray
    radii_sq: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]

    def __getitem__(self, j: int) -> Partitioning:
        return Partitioning(
            self.points[j].copy(), self.sources[j].copy(), self.radii_sq[j].copy()
        )

    def __iter__(self):
        return (self[j] for j in range(len(self)))

    @property
    def t(self) -> int:
        return self.points.shape[0]

    @property
    def psi(self) -> int:
        return self.points.shape[1]

    @property
    def d(self) -> int:
        return self.points.shape[2]

    @property
    def radii(self) -> np.ndarray:
        return np.sqrt(self.radii_sq)

    @classmethod
    def from_partitionings(cls, parts: Sequence[Partitioning]) -> "PartitionEnsemble":
        if not parts:
            raise ParameterError("an ensemble needs at least one partitioning")
        return cls(
            np.stack([p.points for p in parts]),
            np.stack([p.sources for p in parts]),
            np.stack([p.radii_sq for p in parts]),
        )

    def copy(self) -> "PartitionEnsemble":
        return PartitionEnsemble(self.points.copy(), self.sources.copy(), self.radii_sq.copy())


def _window_arrays(window, index):
    X = np.array(window, dtype=np.float64, ndmin=2)
    if X.size == 0 or X.shape[0] == 0:
        raise ParameterError("window is empty")
    if index is None:
        idx = np.arange(X.shape[0], dtype=np.int64)
    else:
        idx = np.asarray(index, dtype=np.int64)
        if idx.shape != (X.shape[0],):
            raise ParameterError("need one stream index per window row")
    return X, idx


def build_partitioning(window, psi: int, rng: np.random.Generator, index=None) -> Partitioning:
    """Sample ``psi`` window rows without replacement and build their balls.

    Parameters
    ----------
    window : (n, d) array_like
        Window rows in stream order.
    psi : int
        Number of samples, ``2 <= psi <= n``.
    rng : numpy.random.Generator
        Source of the sample draw.
    index : (n,) array_like of int, optional
        Stream index of each row; defaults to ``0..n-1``.
    """
    X, idx = _window_arrays(window, index)
    if psi < 2 or psi > X.shape[0]:
        raise ParameterError(
            "psi must satisfy 2 <= psi <= window size (%d), got %r" % (X.shape[0], psi)
        )
    rows = rng.choice(X.shape[0], size=psi, replace=False)
    return Partitioning.from_points(X[rows], idx[rows])


def _check_point(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != d:
        raise ParameterError("point has shape %s, expected (%d,)" % (x.shape, d))
    return x


def assign(x, p: Partitioning) -> Optional[int]:
    """Slot of ``p`` that ``x`` falls into, or ``None``."""
    x = _check_point(x, p.d)
    slot = int(assign_from_sqdist(sqdist(p.points[:, None, :], x[None, None, :]), p.radii_sq)[0])
    return None if slot == NO_SLOT else slot


def assign_many(X, ensemble: PartitionEnsemble, chunk: int = 4096) -> np.ndarray:
    """Assignment matrix of shape ``(n, t)`` with ``NO_SLOT`` for unassigned.

    The result is a transposed view of a partitioning-major ``(t, n)`` array.
    """
    X = np.array(X, dtype=np.float64, ndmin=2)
    if X.shape[1] != ensemble.d:
        raise ParameterError("points have d=%d, ensemble has d=%d" % (X.shape[1], ensemble.d))
    out = np.empty((ensemble.t, X.shape[0]), dtype=np.int64)
    pts = ensemble.points[:, :, None, :]
    for lo in range(0, X.shape[0], chunk):
        block = X[lo:lo + chunk]
        dist = sqdist(pts, block[None, None, :, :])
        out[:, lo:lo + chunk] = assign_from_sqdist(dist, ensemble.radii_sq)
    return out.T


def replace_samples(p: Partitioning, expired, replacements) -> Partitioning:
    """Overwrite expired slots and refresh the radius of every slot.

    ``replacements`` is a sequence of ``(stream_index, point)`` pairs, used to
    fill the expired slots in ascending slot order. Slot ordering is kept.
    """
    slots = sorted(set(int(k) for k in expired))
    replacements = list(replacements)
    if any(k < 0 or k >= p.psi for k in slots):
        raise ParameterError("expired slot index out of range")
    if len(replacements) != len(slots):
        raise ParameterError(
            "%d expired slots but %d replacements" % (len(slots), len(replacements))
        )
    if not slots:
        return p
    points = p.points.copy()
    sources = p.sources.copy()
    for k, (src_index, point) in zip(slots, replacements):
        points[k] = _check_point(point, p.d)
        sources[k] = src_index
    # from_points rejects duplicates between survivors and replacements
    return Partitioning.from_points(points, sources)
