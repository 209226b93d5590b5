"""Vertex-weighted first-passage percolation on lattice rectangles."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from . import gff
from .errors import GeometryError, ResourceError
from .geometry import RectRegion
from .rng import stream

DEFAULT_BUDGET = 5 * 10 ** 8


@dataclass
class WeightedGrid:
    region: RectRegion
    weight: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        if self.weight.shape != self.region.shape:
            raise GeometryError("weight array does not match the region")
        if not np.all(self.weight > 0):
            raise ValueError("vertex weights must be positive")

    @classmethod
    def from_field(cls, region: RectRegion, values: np.ndarray, gamma: float) -> "WeightedGrid":
        return cls(region, np.exp(gamma * np.asarray(values, dtype=float)))

    @classmethod
    def flat(cls, region: RectRegion) -> "WeightedGrid":
        return cls(region, np.ones(region.shape))

    def local(self, p) -> tuple[int, int]:
        if not self.region.contains(p):
            raise GeometryError(f"{tuple(p)} is outside the grid region")
        x0, y0 = self.region.origin
        return p[0] - x0, p[1] - y0


@dataclass
class PathResult:
    weight: float
    path: list


@lru_cache(maxsize=16)
def _lattice_edges(nx: int, ny: int):
    """Directed 4-neighbour edges of an ``nx x ny`` point grid (flat index x*ny+y)."""
    idx = np.arange(nx * ny).reshape(nx, ny)
    src, dst = [], []
    for a, b in ((idx[:-1, :], idx[1:, :]), (idx[:, :-1], idx[:, 1:])):
        src += [a.ravel(), b.ravel()]
        dst += [b.ravel(), a.ravel()]
    return np.concatenate(src), np.concatenate(dst)


def _shortest(weight: np.ndarray, sources, with_super: bool):
    """Dijkstra where entering a vertex costs its weight.

    Returns distances that include the source's own weight.
    """
    nx, ny = weight.shape
    n = nx * ny
    src, dst = _lattice_edges(nx, ny)
    w = weight.ravel()
    if with_super:
        s_idx = np.asarray(sources)
        rows = np.concatenate([src, np.full(s_idx.size, n)])
        cols = np.concatenate([dst, s_idx])
        graph = sp.csr_matrix((w[cols], (rows, cols)), shape=(n + 1, n + 1))
        dist = dijkstra(graph, directed=True, indices=n)[:n]
    else:
        graph = sp.csr_matrix((w[dst], (src, dst)), shape=(n, n))
        dist = dijkstra(graph, directed=True, indices=int(sources)) + w[int(sources)]
    return dist


def _backtrack(weight: np.ndarray, dist: np.ndarray, end: int, is_start) -> list:
    """Walk predecessors back from ``end``; ties go to the lexicographically smallest point."""
    nx, ny = weight.shape
    w = weight.ravel()
    out = [end]
    cur = end
    while not is_start(cur, dist[cur]):
        x, y = divmod(cur, ny)
        best = None
        for px, py in ((x - 1, y), (x, y - 1), (x, y + 1), (x + 1, y)):
            if 0 <= px < nx and 0 <= py < ny:
                u = px * ny + py
                if abs(dist[u] + w[cur] - dist[cur]) <= 1e-12 * max(1.0, dist[cur]):
                    if best is None or (px, py) < divmod(best, ny):
                        best = u
        if best is None:  # pragma: no cover - distances come from the same graph
            raise RuntimeError("predecessor reconstruction failed")
        out.append(best)
        cur = best
    return out[::-1]


def fpp_distance(grid: WeightedGrid, x, y) -> PathResult:
    """Minimum total vertex weight over lattice paths from ``x`` to ``y`` (both ends counted)."""
    lx = grid.local(x)
    ly = grid.local(y)
    nx, ny = grid.weight.shape
    s = lx[0] * ny + lx[1]
    t = ly[0] * ny + ly[1]
    if s == t:
        return PathResult(float(grid.weight[lx]), [tuple(x)])
    dist = _shortest(grid.weight, s, with_super=False)
    flat = _backtrack(grid.weight, dist, t, lambda v, d: v == s)
    x0, y0 = grid.region.origin
    return PathResult(float(dist[t]), [(x0 + v // ny, y0 + v % ny) for v in flat])


def crossing_weight(grid: WeightedGrid, rect: RectRegion | None = None) -> PathResult:
    """Lightest left-right crossing of ``rect`` using only points of ``rect``."""
    rect = grid.region if rect is None else rect
    if not grid.region.contains_rect(rect):
        raise GeometryError("crossing rectangle is not inside the grid")
    gx0, gy0 = grid.region.origin
    rx0, ry0 = rect.origin
    sub = grid.weight[rx0 - gx0: rx0 - gx0 + rect.shape[0], ry0 - gy0: ry0 - gy0 + rect.shape[1]]
    nx, ny = sub.shape
    sources = np.arange(ny)
    sinks = (nx - 1) * ny + np.arange(ny)
    dist = _shortest(sub, sources, with_super=True)
    flatw = sub.ravel()
    # lexicographically smallest sink among the minimisers
    best = float(dist[sinks].min())
    tie = 1e-12 * max(1.0, best)
    end = int(sinks[np.flatnonzero(dist[sinks] <= best + tie)[0]])
    flat = _backtrack(sub, dist, end, lambda v, d: v < ny and abs(d - flatw[v]) <= tie)
    return PathResult(best, [(rx0 + v // ny, ry0 + v % ny) for v in flat])


def path_weight(grid: WeightedGrid, path) -> float:
    """Sum of weights over the path's points, repeats counted each time."""
    return float(sum(grid.weight[grid.local(p)] for p in path))


def is_connected_path(path) -> bool:
    return all(abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1 for a, b in zip(path, path[1:]))


# --------------------------------------------------------------------------
# exponent scan

@dataclass
class ExponentFit:
    gamma: float
    sizes: list
    means: list
    slope: float
    stderr: float
    seed: int
    mode: str = "point2point"
    values: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {"gamma": self.gamma, "sizes": self.sizes, "slope": self.slope,
                "stderr": self.stderr, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2)

    def to_csv(self) -> str:
        lines = ["N,replicate,value"]
        for N, vals in zip(self.sizes, self.values):
            lines += [f"{N},{r},{v:.12g}" for r, v in enumerate(vals)]
        return "\n".join(lines) + "\n"


def fit_slope(sizes, means) -> float:
    return float(np.polyfit(np.log(sizes), np.log(means), 1)[0])


def scan_value(N: int, gamma: float, seed: int, replicate: int, mode: str,
               shift: float = 0.0, method: str = "spectral") -> float:
    """One replicate of the scan observable on ``V_N``."""
    region = RectRegion.box(N, N)
    if gamma == 0.0:
        grid = WeightedGrid.flat(region)
    else:
        vals = gff.sample_values(gff.CovModel(region), seed, [replicate], method, key=(N,))[0]
        grid = WeightedGrid.from_field(region, vals + shift, gamma)
    if mode == "point2point":
        return fpp_distance(grid, (N // 4, N // 2), (3 * N // 4, N // 2)).weight
    if mode == "crossing":
        q, r = N // 4, 3 * N // 4
        return crossing_weight(grid, RectRegion.box(r - q, r - q, q, q)).weight
    raise ValueError(f"unknown mode {mode!r}")


def thread_count(threads: int | None = None) -> int:
    env = os.environ.get("LFPP_THREADS")
    if env:
        return max(1, int(env))
    return max(1, threads or 1)


def exponent_scan(gamma: float, sizes, replicas: int, seed: int, mode: str = "point2point",
                  budget: int = DEFAULT_BUDGET, threads: int | None = None, shift: float = 0.0,
                  n_boot: int = 1000) -> ExponentFit:
    """Mean distance per size and the log-log slope with a bootstrap standard error."""
    sizes = [int(N) for N in sizes]
    if sizes != sorted(sizes) or min(sizes) < 8:
        raise ValueError("sizes must be ascending and at least 8")
    if replicas < 1:
        raise ValueError("replicas must be positive")
    cost = sum(N * N for N in sizes) * replicas
    if cost > budget:
        raise ResourceError(f"scan cost {cost} exceeds budget {budget}")
    tasks = [(N, r) for N in sizes for r in range(replicas)]
    with ThreadPoolExecutor(thread_count(threads)) as pool:
        flat = list(pool.map(lambda t: scan_value(t[0], gamma, seed, t[1], mode, shift), tasks))
    values = np.array(flat).reshape(len(sizes), replicas)
    means = values.mean(axis=1)
    slope = fit_slope(sizes, means)
    if replicas > 1 and gamma != 0.0:
        rng = stream(seed, 0xB007)
        boots = np.empty(n_boot)
        for b in range(n_boot):
            pick = rng.integers(0, replicas, size=(len(sizes), replicas))
            boots[b] = fit_slope(sizes, np.take_along_axis(values, pick, 1).mean(axis=1))
        stderr = float(boots.std(ddof=1))
    else:
        stderr = 0.0
    return ExponentFit(float(gamma), sizes, means.tolist(), slope, stderr, int(seed), mode,
                       values.tolist())
