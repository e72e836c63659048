"""Compiled inner loop for the incremental updater, with a NumPy fallback.

Both paths produce identical nearest/best caches, assignments, and counts;
the compiled one simply avoids materialising ``(affected, omega)`` temporaries.
"""

from __future__ import annotations

import os

import numpy as np

from .kernel import NO_SLOT, membership

try:
    if os.environ.get("IDKS_DISABLE_NUMBA"):
        raise ImportError("disabled by IDKS_DISABLE_NUMBA")
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False


def refresh_affected_numpy(dist, nearest, best, assign_buf, counts, radii_sq,
                           expired, affected, rows, cols, arrival_lo, arrival_len):
    """Update survivors in partitionings that lost samples (NumPy version).

    ``rows``/``cols`` are the replaced (partitioning, slot) pairs in row-major
    order. Arrival columns (``arrival_len`` ring positions from
    ``arrival_lo``) are skipped for the count deltas; the caller overwrites
    them afterwards.
    """
    omega = dist.shape[2]
    psi = dist.shape[1]
    A = affected.size
    # rows whose nearest sample was replaced need a full rescan; decide before touching them
    lost = expired[affected][np.arange(A)[:, None], nearest[affected]]

    # a surviving nearest sample can only be displaced by a new one
    first = np.searchsorted(rows, rows)
    rank = np.arange(rows.size) - first
    for r in range(int(rank.max()) + 1):
        sel = rank == r
        js, ks = rows[sel], cols[sel]
        d_new = dist[js, ks, :]
        cur_best = best[js]
        cur_near = nearest[js]
        kk = ks[:, None]
        take = (d_new < cur_best) | ((d_new == cur_best) & (kk < cur_near))
        best[js] = np.minimum(cur_best, d_new)
        nearest[js] = cur_near + take * (kk - cur_near)

    a, c = np.nonzero(lost)
    if a.size:
        j = affected[a]
        d = dist[j, :, c]
        nearest[j, c] = d.argmin(axis=1)
        best[j, c] = d.min(axis=1)

    fresh = membership(nearest[affected], best[affected], radii_sq[affected])
    old = assign_buf[affected]
    arrival = (np.arange(omega) - arrival_lo) % omega < arrival_len
    old[:, arrival] = NO_SLOT
    keep = np.where(arrival, NO_SLOT, fresh)
    from .model import histogram

    counts[affected] += histogram(keep, psi) - histogram(old, psi)
    assign_buf[affected] = fresh


if NUMBA_AVAILABLE:

    @njit(cache=True)
    def _refresh_affected_nb(dist, nearest, best, assign_buf, counts, radii_sq,
                             expired, affected, arrival_lo, arrival_len):
        psi = dist.shape[1]
        omega = dist.shape[2]
        slots = np.empty(psi, dtype=np.int64)
        for a in range(affected.shape[0]):
            j = affected[a]
            nk = 0
            for k in range(psi):
                if expired[j, k]:
                    slots[nk] = k
                    nk += 1
            for r in range(omega):
                n0 = nearest[j, r]
                if expired[j, n0]:
                    nn = 0
                    bb = dist[j, 0, r]
                    for k in range(1, psi):
                        d = dist[j, k, r]
                        if d < bb:
                            bb = d
                            nn = k
                else:
                    nn = n0
                    bb = best[j, r]
                    for q in range(nk):
                        k = slots[q]
                        d = dist[j, k, r]
                        if d < bb or (d == bb and k < nn):
                            bb = d
                            nn = k
                nearest[j, r] = nn
                best[j, r] = bb
                new = nn if bb < radii_sq[j, nn] else -1
                if (r - arrival_lo) % omega >= arrival_len:
                    old = assign_buf[j, r]
                    if old != new:
                        if old >= 0:
                            counts[j, old] -= 1
                        if new >= 0:
                            counts[j, new] += 1
                assign_buf[j, r] = new


def refresh_affected(dist, nearest, best, assign_buf, counts, radii_sq,
                     expired, affected, rows, cols, arrival_lo, arrival_len, use_numba=None):
    """Dispatch to the compiled kernel when numba is importable."""
    if use_numba is None:
        use_numba = NUMBA_AVAILABLE
    if use_numba:
        _refresh_affected_nb(dist, nearest, best, assign_buf, counts, radii_sq,
                             expired, affected, arrival_lo, arrival_len)
    else:
        refresh_affected_numpy(dist, nearest, best, assign_buf, counts, radii_sq,
                               expired, affected, rows, cols, arrival_lo, arrival_len)
