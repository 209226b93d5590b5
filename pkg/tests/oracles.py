"""Independent reference implementations used only by the tests."""
from __future__ import annotations

import itertools

import numpy as np


def _neighbours(p, shape):
    x, y = p
    for q in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
        if 0 <= q[0] < shape[0] and 0 <= q[1] < shape[1]:
            yield q


def brute_force_distance(weight: np.ndarray, start, end) -> float:
    """Minimum vertex weight over all simple paths, by depth-first enumeration."""
    best = [np.inf]

    def dfs(p, seen, acc):
        if acc >= best[0]:
            return
        if p == end:
            best[0] = acc
            return
        for q in _neighbours(p, weight.shape):
            if q not in seen:
                seen.add(q)
                dfs(q, seen, acc + weight[q])
                seen.remove(q)

    dfs(tuple(start), {tuple(start)}, weight[tuple(start)])
    return best[0]


def brute_force_crossing(weight: np.ndarray) -> float:
    nx, ny = weight.shape
    return min(brute_force_distance(weight, (0, a), (nx - 1, b))
               for a in range(ny) for b in range(ny))


def exhaustive_phi(times, values, lam) -> float:
    """Best penalised variation over all subsets of internal grid points."""
    n = len(values)
    lam_at = lam if callable(lam) else (lambda t: lam)
    best = -np.inf
    inner = range(1, n - 1)
    for r in range(n - 1):
        for sub in itertools.combinations(inner, r):
            pts = (0,) + sub + (n - 1,)
            v = sum(abs(values[b] - values[a]) for a, b in zip(pts, pts[1:]))
            v -= sum(lam_at(times[i]) for i in sub)
            best = max(best, v)
    return best
