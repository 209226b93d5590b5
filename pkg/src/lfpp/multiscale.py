"""Desk-scale multi-level crossing construction.

A level-``ell`` strip is ``[0, w] x [0, h]`` with ``w = floor(A N a_ell)`` and
``h = floor(N a_ell)`` where ``A`` is the integer aspect.  Its four children
are the level-(ell-1) strips given by the one-step coverings of both sides:
halves ``0`` (left) and ``1`` (right), layers ``1`` (bottom) and ``2`` (top).

Each strip carries its own Dirichlet field.  A child's field is the fine part
of the parent's field on the child, so every strip's field is a Dirichlet GFF
on that strip.  Crossing weights are always reported against the strip's own
field.

Level 0 crossings are straight lines at a random interior row.  Strategy I
picks the layer of each half uniformly.  Strategy II builds both full-width
layer crossings and switches between them where the coarse field favours the
other layer, using tick detection on the decorrelated gain process.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import fpp, gff, kernels, totalvar
from .errors import GeometryError, ResourceError
from .geometry import IntervalZ, RectRegion, ScaleParams, covering
from .rng import stream

DEFAULT_BUDGET = 5 * 10 ** 8
FIELD_KEY = 0x4D53


@dataclass(frozen=True)
class DeskConfig:
    params: ScaleParams
    N: int = 16
    aspect: int | None = None
    beta: float | None = None
    recursive_gap: int | None = None

    @property
    def A(self) -> int:
        return int(self.aspect) if self.aspect is not None else int(round(self.params.Gamma))

    @property
    def B(self) -> float:
        return float(self.beta) if self.beta is not None else float(self.params.beta)

    def dims(self, ell: int) -> tuple[int, int]:
        a = self.params.base ** ell
        return math.floor(self.A * self.N * a), math.floor(self.N * a)


@dataclass(frozen=True)
class Layout:
    ell: int
    w: int
    h: int
    children: dict          # (half, layer) -> RectRegion in strip coordinates
    rows: tuple             # band-middle rows of layers 1 and 2
    intervals: tuple        # switch intervals (IntervalZ)
    short: tuple            # flags for intervals shorter than beta h' / 4
    window: int             # gadget search width


@lru_cache(maxsize=64)
def layout(cfg: DeskConfig, ell: int) -> Layout:
    if ell < 1:
        raise GeometryError("only levels >= 1 have children")
    w, h = cfg.dims(ell)
    wc, hc = cfg.dims(ell - 1)
    if hc < 2 or wc < 2:
        raise GeometryError(f"level {ell - 1} strips are degenerate at N={cfg.N}")
    cx = covering(cfg.params, ell, cfg.A * cfg.N, 0, 1)
    cy = covering(cfg.params, ell, cfg.N, 0, 1)
    xs = (cx[0][0], cx[2][0])
    ys = (cy[0][0], cy[2][0])
    children = {}
    for half in (0, 1):
        for layer in (1, 2):
            ix, iy = xs[half], ys[layer - 1]
            children[(half, layer)] = RectRegion(ix, iy)
    y1 = hc // 2
    rows = (y1, h - y1)
    step = math.floor(cfg.B * hc) + 1
    intervals, short = [], []
    for lo in range(0, w + 1, step):
        iv = IntervalZ(lo, min(w, lo + step - 1))
        intervals.append(iv)
        short.append(iv.size < cfg.B * hc / 4.0)
    window = max(1, math.floor(cfg.B * hc / 4.0))
    return Layout(ell, w, h, children, rows, tuple(intervals), tuple(short), window)


@lru_cache(maxsize=64)
def coarse_gain_cov(cfg: DeskConfig, ell: int) -> np.ndarray:
    """Exact covariance of ``sum_{J_j} (c(x, y1) - c(x, y2))`` over switch intervals.

    ``c`` is the coarse field: the strip field minus the fine field of the child
    that contains the point.  For points in the same child the covariance is
    ``G_strip - G_child``; for points in different children (or outside every
    child) it is ``G_strip``, because a child's fine field is independent of
    the field outside the child's interior.
    """
    lay = layout(cfg, ell)
    w, h = lay.w, lay.h
    ks = kernels.RectKernel(w, h)
    n = len(lay.intervals)
    A = np.zeros((ks.n_interior, n))
    for j, iv in enumerate(lay.intervals):
        for x in iv.points():
            if 0 < x < w:
                A[ks.index((x, lay.rows[0])), j] += 1.0
                A[ks.index((x, lay.rows[1])), j] -= 1.0
    K = A.T @ kernels.green_apply(ks, A)
    for rect in lay.children.values():
        kc = kernels.RectKernel(rect.M, rect.N)
        Ac = np.zeros((kc.n_interior, n))
        x0, y0 = rect.origin
        for (x, y) in kc.interior_points():
            Ac[kc.index((x, y))] = A[ks.index((x + x0, y + y0))]
        if np.any(Ac):
            K -= Ac.T @ kernels.green_apply(kc, Ac)
    return 0.5 * (K + K.T)


# --------------------------------------------------------------------------
# plans and paths

@dataclass
class GadgetSpec:
    column_rect: RectRegion
    mode: str = "straight"


@dataclass
class CrossingPlan:
    level: int
    rect: RectRegion
    switch_intervals: list = field(default_factory=list)
    layer_choice: list = field(default_factory=list)
    gadgets: list = field(default_factory=list)
    skeleton: list = field(default_factory=list)
    connectors: list = field(default_factory=list)
    short_intervals: list = field(default_factory=list)
    lam_star: float | None = None
    regime_ok: bool | None = None
    coin: int | None = None


@dataclass
class StripResult:
    pts: np.ndarray         # (n, 2) strip coordinates, x non-decreasing except inside gadgets
    join: np.ndarray        # marks connector and gadget points added at this level
    weight: float
    join_weight: float
    switches: int
    plan: CrossingPlan

    def path(self, origin=(0, 0)) -> list:
        return [(int(x) + origin[0], int(y) + origin[1]) for x, y in self.pts]


def _weight(warr: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return warr[pts[:, 0], pts[:, 1]]


def _vertical(x: int, y_from: int, y_to: int, include_end: bool = True) -> np.ndarray:
    """Column points from ``y_from`` (excluded) towards ``y_to``."""
    if y_from == y_to:
        return np.zeros((0, 2), dtype=np.int64)
    s = 1 if y_to > y_from else -1
    stop = y_to + s if include_end else y_to
    ys = np.arange(y_from + s, stop, s)
    return np.stack([np.full(ys.size, x), ys], 1).astype(np.int64)


def _hline(x_from: int, x_to: int, y: int) -> np.ndarray:
    """Row points ``x_from..x_to`` inclusive (empty when ``x_to < x_from``)."""
    xs = np.arange(x_from, x_to + 1)
    return np.stack([xs, np.full(xs.size, y)], 1).astype(np.int64)


def mid_connector(warr: np.ndarray, end, start):
    """Cheapest horizontal-vertical-horizontal link from ``end`` to ``start``.

    Both endpoints are excluded.  Returns ``(points, is_vertical, column)``.
    """
    xe, ye = int(end[0]), int(end[1])
    xs, ys = int(start[0]), int(start[1])
    if xs <= xe:
        raise GeometryError("connector endpoints must be ordered left to right")
    if ye == ys:
        pts = _hline(xe + 1, xs - 1, ye)
        return pts, np.zeros(len(pts), bool), None
    best = None
    for xg in range(xe, xs + 1):
        a = _hline(xe + 1, xg, ye)
        v = _vertical(xg, ye, ys, include_end=xg != xs)
        b = _hline(xg + 1, xs - 1, ys)
        cost = _weight(warr, a).sum() + _weight(warr, v).sum() + _weight(warr, b).sum()
        if best is None or cost < best[0]:
            best = (cost, a, v, b, xg)
    _, a, v, b, xg = best
    pts = np.concatenate([a, v, b])
    vert = np.concatenate([np.zeros(len(a), bool), np.ones(len(v), bool), np.zeros(len(b), bool)])
    return pts, vert, xg


def _join_paths(parts):
    pts = np.concatenate([p for p, _ in parts])
    join = np.concatenate([j for _, j in parts])
    return pts, join


def _shift(res: StripResult, origin) -> tuple[np.ndarray, np.ndarray]:
    return res.pts + np.asarray(origin, dtype=np.int64), np.zeros(len(res.pts), bool)


def is_connected(pts) -> bool:
    pts = np.asarray(pts)
    return bool(np.all(np.abs(np.diff(pts, axis=0)).sum(axis=1) == 1)) if len(pts) > 1 else True


# --------------------------------------------------------------------------
# the recursive builder

@dataclass
class _Context:
    cfg: DeskConfig
    gamma: float
    seed: int
    replicate: int
    mirror: bool
    top_strategy: str
    records: list


def _child_code(half: int, layer: int, mirror: bool) -> int:
    if mirror:
        layer = 3 - layer
    return 2 * half + layer


def _build(ctx: _Context, ell: int, eta: np.ndarray, key: tuple, strategy: str | None = None) -> StripResult:
    cfg = ctx.cfg
    warr = np.exp(ctx.gamma * eta)
    rng = stream(ctx.seed, ctx.replicate, *key)
    w, h = eta.shape[0] - 1, eta.shape[1] - 1
    if ell == 0:
        r = int(rng.integers(1, h))
        if ctx.mirror:
            r = h - r
        pts = _hline(0, w, r)
        plan = CrossingPlan(0, RectRegion.box(w, h), [IntervalZ(0, w)], [r])
        res = StripResult(pts, np.zeros(len(pts), bool), float(_weight(warr, pts).sum()), 0.0, 0, plan)
        ctx.records.append((0, res.weight, 0.0, 0, None))
        return res
    lay = layout(cfg, ell)
    if (w, h) != (lay.w, lay.h):
        raise GeometryError(f"field shape {eta.shape} does not match level {ell}")
    kids, fines = {}, {}
    for (half, layer), rect in lay.children.items():
        x0, y0 = rect.origin
        sub = eta[x0: x0 + rect.M + 1, y0: y0 + rect.N + 1]
        fine = sub - gff.harmonic_extension(sub)
        fines[(half, layer)] = fine
        code = _child_code(half, layer, ctx.mirror)
        kids[(half, layer)] = _build(ctx, ell - 1, fine, key + (code,))
    if strategy is None:
        strategy = "I" if ell == 1 else ctx.top_strategy
    if strategy == "I":
        res = _strategy_one(ctx, lay, warr, kids, rng)
    else:
        res = _strategy_two(ctx, lay, eta, warr, kids, fines, rng)
    ctx.records.append((ell, res.weight, res.join_weight, res.switches, res.plan.lam_star))
    return res


def _layer_path(lay: Layout, warr, kids, k_left: int, k_right: int):
    left = kids[(0, k_left)]
    right = kids[(1, k_right)]
    lo = lay.children[(0, k_left)].origin
    ro = lay.children[(1, k_right)].origin
    lp, lj = _shift(left, lo)
    rp, rj = _shift(right, ro)
    cpts, cvert, xg = mid_connector(warr, lp[-1], rp[0])
    pts, join = _join_paths([(lp, lj), (cpts, cvert), (rp, rj)])
    conn = None
    if xg is not None and cvert.any():
        ys = cpts[cvert][:, 1]
        conn = GadgetSpec(RectRegion(IntervalZ(xg, xg), IntervalZ(int(ys.min()), int(ys.max()))))
    return pts, join, conn


def _finish(warr, pts, join, plan, switches) -> StripResult:
    wts = _weight(warr, pts)
    return StripResult(pts, join, float(wts.sum()), float(wts[join].sum()), switches, plan)


def _strategy_one(ctx, lay, warr, kids, rng) -> StripResult:
    ks = [int(rng.integers(1, 3)), int(rng.integers(1, 3))]
    if ctx.mirror:
        ks = [3 - k for k in ks]
    pts, join, conn = _layer_path(lay, warr, kids, ks[0], ks[1])
    halves = [lay.children[(0, ks[0])].base, lay.children[(1, ks[1])].base]
    plan = CrossingPlan(lay.ell, RectRegion.box(lay.w, lay.h), halves, ks,
                        skeleton=[lay.children[(0, ks[0])], lay.children[(1, ks[1])]],
                        connectors=[conn] if conn else [])
    return _finish(warr, pts, join, plan, 0)


def _first_index(pts: np.ndarray, x: int) -> int:
    """Index of the path's first point in column ``x``."""
    hits = np.flatnonzero(pts[:, 0] == x)
    if hits.size == 0:
        raise GeometryError(f"path never visits column {x}")
    return int(hits[0])


def _gain_process(ctx, lay, eta, kids, fines):
    """Decorrelated gains and their variances for the switch intervals."""
    cfg = ctx.cfg
    wc = cfg.dims(lay.ell - 1)[0]
    wpc = float(np.mean([r.weight for r in kids.values()])) / (wc + 1)
    coarse = []
    for layer, y in zip((1, 2), lay.rows):
        row = eta[:, y].copy()
        for half in (0, 1):
            rect = lay.children[(half, layer)]
            x0, y0 = rect.origin
            row[x0: x0 + rect.M + 1] -= fines[(half, layer)][:, y - y0]
        coarse.append(row)
    diff = coarse[0] - coarse[1]
    sums = np.array([diff[iv.left: iv.right + 1].sum() for iv in lay.intervals])
    scale = wpc * ctx.gamma / 2.0
    T, var, _ = gff.decorrelate_line_sums(coarse_gain_cov(cfg, lay.ell))
    return scale * (T @ sums), scale ** 2 * var, wpc


def _bridge_fill(rng, knots, values, n_fine):
    """Brownian path through ``values`` at ``knots`` sampled on a fine grid."""
    t = np.union1d(np.linspace(0.0, 1.0, n_fine + 1), knots)
    bm = np.concatenate([[0.0], np.cumsum(rng.standard_normal(t.size - 1) * np.sqrt(np.diff(t)))])
    noise = bm - np.interp(t, knots, np.interp(knots, t, bm))
    return t, noise


def _strategy_two(ctx, lay, eta, warr, kids, fines, rng) -> StripResult:
    cfg = ctx.cfg
    s = int(rng.integers(0, 2))
    if ctx.mirror:
        s = 1 - s
    paths = {k: _layer_path(lay, warr, kids, k, k) for k in (1, 2)}
    n_int = len(lay.intervals)
    layers = [1 + s] * n_int
    lam = None
    regime = None
    if ctx.gamma != 0.0 and n_int > 1:
        gains, var, wpc = _gain_process(ctx, lay, eta, kids, fines)
        V = float(var.sum())
        if V > 0:
            knots = np.concatenate([[0.0], np.cumsum(var) / V])
            knots[-1] = 1.0
            S = np.concatenate([[0.0], np.cumsum(gains)]) / math.sqrt(V)
            gap = lay.rows[1] - lay.rows[0]
            lam = wpc * gap / math.sqrt(V)
            n_fine = min(max(400, math.ceil((20.0 / lam) ** 2)), 2_000_000)
            t, noise = _bridge_fill(rng, knots, S, n_fine)
            Z = (-1) ** s * np.interp(t, knots, S) + noise
            alpha = cfg.params.alpha
            cap = max(0, min(math.ceil(2.0 / lam ** 2), math.floor(3 * alpha)))
            part, _ = totalvar.uptick_partition(totalvar.PathSample(t, Z), lam, cap_k=cap)
            bounds = np.asarray(part.points)
            zb = np.interp(bounds, t, Z) * (-1) ** s
            dS = np.diff(zb)
            cell_layer = np.where(dS > 0, 2, np.where(dS < 0, 1, 1 + s))
            inner = bounds[1:-1]
            layers = [int(cell_layer[np.searchsorted(inner, knots[j], side="right")]) for j in range(n_int)]
            regime = alpha / 4.0 <= lam ** -2 <= alpha / 2.0
    # assemble, switching inside the right end of each interval where the layer changes
    gadgets = []
    pieces = []
    cur = layers[0]
    start = 0
    thresh = cfg.recursive_gap if cfg.recursive_gap is not None else 2 * lay.window
    for j in range(n_int - 1):
        if layers[j + 1] == cur:
            continue
        src_pts, src_join, _ = paths[cur]
        dst_pts, dst_join, _ = paths[layers[j + 1]]
        iv = lay.intervals[j]
        lo = max(iv.left, iv.right - lay.window + 1)
        cw_src = np.cumsum(_weight(warr, src_pts))
        cw_dst = np.cumsum(_weight(warr, dst_pts))
        best = None
        for xg in range(lo, iv.right + 1):
            fs, fd = _first_index(src_pts, xg), _first_index(dst_pts, xg)
            r0, r1 = int(src_pts[fs, 1]), int(dst_pts[fd, 1])
            v = _vertical(xg, r0, r1)
            # prefix of the source, the column segment, then the destination after its entry point
            cost = cw_src[fs] - cw_dst[fd] + _weight(warr, v).sum()
            if best is None or cost < best[0]:
                best = (cost, xg, fs, fd, r0, r1)
        _, xg, fs, fd, r0, r1 = best
        if abs(r1 - r0) > thresh:
            gpts, grect = _recursive_gadget(ctx, rng, lay, xg, r0, r1)
            mode = "recursive"
        else:
            gpts = _vertical(xg, r0, r1)
            grect = RectRegion(IntervalZ(xg, xg), IntervalZ(min(r0, r1), max(r0, r1)))
            mode = "straight"
        pieces.append((src_pts[start: fs + 1], src_join[start: fs + 1]))
        pieces.append((gpts, np.ones(len(gpts), bool)))
        gadgets.append(GadgetSpec(grect, mode))
        start = fd + 1
        cur = layers[j + 1]
    last_pts, last_join, _ = paths[cur]
    pieces.append((last_pts[start:], last_join[start:]))
    pts, join = _join_paths(pieces)
    conns = [paths[k][2] for k in (1, 2) if paths[k][2] is not None]
    plan = CrossingPlan(lay.ell, RectRegion.box(lay.w, lay.h), list(lay.intervals), layers, gadgets,
                        skeleton=list(lay.children.values()), connectors=conns,
                        short_intervals=[iv for iv, f in zip(lay.intervals, lay.short) if f],
                        lam_star=lam, regime_ok=regime, coin=s)
    return _finish(warr, pts, join, plan, len(gadgets))


def _recursive_gadget(ctx, rng, lay, xg, r0, r1):
    """Two vertical runs joined by a horizontal link, inside a column band around ``xg``.

    Ends at ``(xg, r1)`` and excludes ``(xg, r0)``.
    """
    c = max(1, lay.window // 2)
    lo, hi = max(0, xg - c), min(lay.w, xg + c)
    xa = int(rng.integers(lo, hi + 1))
    xb = int(rng.integers(lo, hi + 1))
    sgn = 1 if r1 > r0 else -1
    ym = r0 + sgn * (abs(r1 - r0) // 2)
    parts = []

    def hseg(xf, xt, y):
        if xt == xf:
            return np.zeros((0, 2), dtype=np.int64)
        st = 1 if xt > xf else -1
        xs = np.arange(xf + st, xt + st, st)
        return np.stack([xs, np.full(xs.size, y)], 1).astype(np.int64)

    parts.append(hseg(xg, xa, r0))
    parts.append(_vertical(xa, r0, ym))
    parts.append(hseg(xa, xb, ym))
    parts.append(_vertical(xb, ym, r1))
    parts.append(hseg(xb, xg, r1))
    pts = np.concatenate(parts)
    if len(pts) == 0 or not (pts[-1] == (xg, r1)).all():
        pts = np.concatenate([pts, [[xg, r1]]]).astype(np.int64)
    rect = RectRegion(IntervalZ(lo, hi), IntervalZ(min(r0, r1), max(r0, r1)))
    return pts, rect


# --------------------------------------------------------------------------
# public entry points

def sample_strip(cfg: DeskConfig, ell: int, seed: int, replicate: int) -> np.ndarray:
    w, h = cfg.dims(ell)
    return gff.sample_values(gff.CovModel.box(w, h), seed, [replicate], "spectral", key=(FIELD_KEY, ell))[0]


def build_crossing(cfg: DeskConfig, ell: int, eta: np.ndarray, gamma: float, seed: int,
                   replicate: int = 0, mirror: bool = False, strategy: str = "II",
                   top: str | None = None):
    """Construct a crossing of the level-``ell`` strip carrying field ``eta``.

    ``strategy`` applies above level 1; ``top`` forces the rule used at ``ell``
    itself.  Returns ``(StripResult, records)`` where each record is
    ``(level, weight, join_weight, switches, lam_star)`` for one strip.
    """
    ctx = _Context(cfg, gamma, seed, replicate, mirror, strategy, [])
    res = _build(ctx, ell, np.asarray(eta, dtype=float), (ell,), strategy=top)
    return res, ctx.records


def strategy1_crossing(cfg: DeskConfig, ell: int, eta, gamma: float, seed: int, replicate: int = 0,
                       mirror: bool = False):
    res, _ = build_crossing(cfg, ell, eta, gamma, seed, replicate, mirror, strategy="I", top="I")
    return res.plan, fpp.PathResult(res.weight, res.path())


def strategy2_crossing(cfg: DeskConfig, ell: int, eta, gamma: float, seed: int, replicate: int = 0,
                       mirror: bool = False):
    res, _ = build_crossing(cfg, ell, eta, gamma, seed, replicate, mirror, strategy="II", top="II")
    return res.plan, fpp.PathResult(res.weight, res.path())


def compare_vs_optimal(rect: RectRegion, eta: np.ndarray, gamma: float, path) -> float:
    grid = fpp.WeightedGrid.from_field(rect, eta, gamma)
    opt = fpp.crossing_weight(grid, rect).weight
    return fpp.path_weight(grid, path) / opt


@dataclass
class LevelStats:
    level: int
    d_mean: float
    d_se: float
    d_join_mean: float
    switches_mean: float
    switches_max: int
    ratio: float
    ratio_se: float
    regime_fraction: float | None = None


def _replicate_rows(cfg, levels, gamma, seed, r, strategy):
    eta = sample_strip(cfg, levels, seed, r)
    _, recs = build_crossing(cfg, levels, eta, gamma, seed, r, strategy=strategy)
    rows = []
    for ell in range(levels + 1):
        mine = [rec for rec in recs if rec[0] == ell]
        lams = [rec[4] for rec in mine if rec[4] is not None]
        rows.append({
            "level": ell, "replicate": r,
            "d": float(np.mean([m[1] for m in mine])),
            "d_join": float(np.mean([m[2] for m in mine])),
            "switches": float(np.mean([m[3] for m in mine])),
            "switches_max": int(max(m[3] for m in mine)),
            "lams": lams,
        })
    return rows


def recursive_run(params: ScaleParams, levels: int, gamma: float, replicas: int, seed: int,
                  N: int = 16, aspect: int | None = None, beta: float | None = None,
                  strategy: str = "II", threads: int | None = None, budget: int = DEFAULT_BUDGET,
                  n_boot: int = 500):
    """Per-level crossing statistics over independent replicas.

    Returns ``(stats, rows)`` where ``rows`` are per (level, replicate) means
    over the strips of that level.
    """
    if not 1 <= levels <= 4:
        raise ValueError("levels must be between 1 and 4")
    cfg = DeskConfig(params, N, aspect, beta)
    w, h = cfg.dims(levels)
    cost = (w + 1) * (h + 1) * replicas
    if cost > budget:
        raise ResourceError(f"run cost {cost} exceeds budget {budget}")
    for ell in range(1, levels + 1):
        layout(cfg, ell)
    with ThreadPoolExecutor(fpp.thread_count(threads)) as pool:
        per = list(pool.map(lambda r: _replicate_rows(cfg, levels, gamma, seed, r, strategy),
                            range(replicas)))
    rows = [row for rep in per for row in rep]
    d = np.array([[rep[ell]["d"] for ell in range(levels + 1)] for rep in per])
    dj = np.array([[rep[ell]["d_join"] for ell in range(levels + 1)] for rep in per])
    sw = np.array([[rep[ell]["switches"] for ell in range(levels + 1)] for rep in per])
    swmax = np.array([[rep[ell]["switches_max"] for ell in range(levels + 1)] for rep in per])
    rng = stream(seed, 0xB007)
    boots = np.array([d[rng.integers(0, replicas, replicas)].mean(axis=0) for _ in range(n_boot)])
    means = d.mean(axis=0)
    stats = []
    alpha = params.alpha
    for ell in range(levels + 1):
        lams = [lam for rep in per for lam in rep[ell]["lams"]]
        reg = (float(np.mean([alpha / 4 <= lam ** -2 <= alpha / 2 for lam in lams]))
               if lams else None)
        if ell == 0:
            ratio, rse = float("nan"), float("nan")
        else:
            ratio = float(means[ell] / means[ell - 1])
            rse = float((boots[:, ell] / boots[:, ell - 1]).std(ddof=1)) if replicas > 1 else 0.0
        stats.append(LevelStats(ell, float(means[ell]),
                                float(d[:, ell].std(ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0,
                                float(dj[:, ell].mean()), float(sw[:, ell].mean()),
                                int(swmax[:, ell].max()), ratio, rse, reg))
    for row in rows:
        row.pop("lams")
        row.pop("switches_max")
    return stats, rows


def rows_to_csv(rows) -> str:
    lines = ["level,replicate,d,d_join,switches"]
    for r in rows:
        lines.append(f"{r['level']},{r['replicate']},{r['d']:.12g},{r['d_join']:.12g},{r['switches']:.12g}")
    return "\n".join(lines) + "\n"
