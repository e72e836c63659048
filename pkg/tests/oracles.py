"""Brute-force reference implementations, written with plain loops.

They share no code with the package and exist only to cross-check it.
"""

import math


def radii(points):
    out = []
    for i, p in enumerate(points):
        out.append(min(math.dist(p, q) for j, q in enumerate(points) if j != i))
    return out


def assign(x, points, rad):
    """Nearest sample (lowest index on ties) if strictly inside its ball, else None."""
    best, best_d = None, math.inf
    for k, p in enumerate(points):
        d = math.dist(x, p)
        if d < best_d:
            best, best_d = k, d
    return best if best_d < rad[best] else None


def score(x, partitionings, window):
    """Normal score of ``x``; ``partitionings`` is a list of sample point lists."""
    t, omega = len(partitionings), len(window)
    total = 0.0
    for pts in partitionings:
        rad = radii(pts)
        k = assign(x, pts, rad)
        if k is None:
            continue
        total += sum(1 for y in window if assign(y, pts, rad) == k) / omega
    return total / t


def auc_pairs(scores, labels):
    """P(pos > neg) + 0.5 P(tie) over all positive/negative pairs."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))
