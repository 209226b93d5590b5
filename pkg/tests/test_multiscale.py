import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfpp import gff, kernels
from lfpp import multiscale as ms
from lfpp.errors import GeometryError, ResourceError
from lfpp.geometry import RectRegion, ScaleParams

PARAMS = ScaleParams.from_m(2, m_Gamma=2)
SMALL = ms.DeskConfig(PARAMS, N=4)
MID = ms.DeskConfig(PARAMS, N=8)


def test_dims_and_aspect():
    assert SMALL.A == 5
    assert SMALL.dims(0) == (20, 4)
    assert SMALL.dims(1) == (math.floor(20 * PARAMS.base), math.floor(4 * PARAMS.base))
    assert ms.DeskConfig(PARAMS, N=4, aspect=8).dims(0) == (32, 4)


@pytest.mark.parametrize("cfg", [SMALL, MID, ms.DeskConfig(PARAMS, N=16, beta=8.0)])
def test_layout_invariants(cfg):
    for ell in (1, 2):
        lay = ms.layout(cfg, ell)
        strip = RectRegion.box(lay.w, lay.h)
        assert len(lay.children) == 4
        for (half, layer), rect in lay.children.items():
            assert strip.contains_rect(rect)
            assert (rect.M, rect.N) == cfg.dims(ell - 1)
        assert lay.children[(0, 1)].base.left == 0 and lay.children[(1, 1)].base.right == lay.w
        assert lay.children[(0, 1)].span.left == 0 and lay.children[(0, 2)].span.right == lay.h
        # switch intervals tile the base
        assert lay.intervals[0].left == 0 and lay.intervals[-1].right == lay.w
        for a, b in zip(lay.intervals, lay.intervals[1:]):
            assert b.left == a.right + 1
        hc = cfg.dims(ell - 1)[1]
        for iv, flag in zip(lay.intervals[:-1], lay.short[:-1]):
            assert iv.size == math.floor(cfg.B * hc) + 1 and not flag
        assert lay.short[-1] == (lay.intervals[-1].size < cfg.B * hc / 4)
        assert lay.rows[0] < lay.rows[1]


def test_layout_errors():
    with pytest.raises(GeometryError):
        ms.layout(SMALL, 0)
    with pytest.raises(GeometryError):
        ms.layout(ms.DeskConfig(PARAMS, N=1), 1)


def test_coarse_gain_cov_matches_dense_route():
    # the coarse field is a linear map of the strip field; push G through it explicitly
    cfg, ell = SMALL, 1
    lay = ms.layout(cfg, ell)
    w, h = lay.w, lay.h
    k = kernels.RectKernel(w, h)
    basis = np.zeros((k.n_interior, w + 1, h + 1))
    for i, (x, y) in enumerate(k.interior_points()):
        basis[i, x, y] = 1.0
    coarse = basis.copy()
    for rect in lay.children.values():
        x0, y0 = rect.origin
        sub = basis[:, x0: x0 + rect.M + 1, y0: y0 + rect.N + 1]
        fine = sub - gff.harmonic_extension(sub)
        # points of overlapping children: the construction subtracts the fine part of the owning child
        coarse[:, x0: x0 + rect.M + 1, y0: y0 + rect.N + 1] -= fine
    G = kernels.greens_via_solve(RectRegion.box(w, h)).values
    sums = np.array([[coarse[:, x, lay.rows[0]] - coarse[:, x, lay.rows[1]] for x in iv.points()]
                     for iv in lay.intervals], dtype=object)
    A = np.stack([np.sum(np.stack(list(s)), axis=0) for s in sums])   # (n_int, n_interior)
    dense = A @ G @ A.T
    assert np.abs(dense - ms.coarse_gain_cov(cfg, ell)).max() < 1e-9 * np.abs(dense).max()


def test_mid_connector():
    warr = np.ones((10, 6))
    pts, vert, col = ms.mid_connector(warr, (2, 1), (7, 1))
    assert col is None and pts.tolist() == [[3, 1], [4, 1], [5, 1], [6, 1]]
    warr[4, :] = 0.01
    pts, vert, col = ms.mid_connector(warr, (2, 1), (7, 4))
    assert col == 4
    full = np.concatenate([[[2, 1]], pts, [[7, 4]]])
    assert ms.is_connected(full)
    with pytest.raises(GeometryError):
        ms.mid_connector(warr, (5, 1), (5, 2))


def test_level_zero_straight_line():
    eta = ms.sample_strip(SMALL, 0, 3, 0)
    res, recs = ms.build_crossing(SMALL, 0, eta, 0.5, 3)
    ys = set(res.pts[:, 1].tolist())
    assert len(ys) == 1 and 0 < ys.pop() < SMALL.dims(0)[1]
    assert res.pts[:, 0].tolist() == list(range(SMALL.dims(0)[0] + 1))
    assert res.switches == 0 and recs == [(0, res.weight, 0.0, 0, None)]


def _check_crossing(res, eta, gamma, w):
    warr = np.exp(gamma * eta)
    assert ms.is_connected(res.pts)
    assert res.pts[0, 0] == 0 and res.pts[-1, 0] == w
    assert res.pts[:, 0].min() == 0 and res.pts[:, 0].max() == w
    assert res.weight == pytest.approx(float(warr[res.pts[:, 0], res.pts[:, 1]].sum()), rel=1e-12)
    assert 0 <= res.join_weight <= res.weight


@given(st.integers(0, 10 ** 6), st.sampled_from([0.0, 0.3, 1.0, 1.5]), st.sampled_from(["I", "II"]),
       st.sampled_from([1, 2]))
@settings(max_examples=40, deadline=None)
def test_crossings_are_feasible(seed, gamma, strategy, ell):
    eta = ms.sample_strip(SMALL, ell, seed, 0)
    res, _ = ms.build_crossing(SMALL, ell, eta, gamma, seed, strategy=strategy)
    _check_crossing(res, eta, gamma, SMALL.dims(ell)[0])
    rect = RectRegion.box(*SMALL.dims(ell))
    assert ms.compare_vs_optimal(rect, eta, gamma, res.path()) >= 1 - 1e-12


def test_compare_straight_line_flat_is_one():
    rect = RectRegion.box(30, 1)
    eta = np.zeros(rect.shape)
    assert ms.compare_vs_optimal(rect, eta, 0.0, [(x, 0) for x in range(31)]) == 1.0


def test_flat_strategy_one_weight_counts_points():
    for seed in range(10):
        eta = ms.sample_strip(MID, 2, seed, 0)
        res, _ = ms.build_crossing(MID, 2, eta, 0.0, seed, strategy="I", top="I")
        verticals = int(np.sum(np.diff(res.pts[:, 0]) == 0))
        assert res.weight == MID.dims(2)[0] + 1 + verticals
        assert len({tuple(p) for p in res.pts}) == len(res.pts)


def test_plan_invariants():
    for seed in range(30):
        eta = ms.sample_strip(MID, 2, seed, 0)
        plan, path = ms.strategy2_crossing(MID, 2, eta, 1.0, seed)
        lay = ms.layout(MID, 2)
        assert plan.switch_intervals == list(lay.intervals)
        assert len(plan.layer_choice) == len(plan.switch_intervals)
        changes = sum(a != b for a, b in zip(plan.layer_choice, plan.layer_choice[1:]))
        assert changes == len(plan.gadgets)
        assert len(plan.gadgets) <= math.floor(3 * PARAMS.alpha)
        pset = set(path.path)
        for g in plan.gadgets:
            if g.mode == "straight":
                x = g.column_rect.base.left
                ys = range(g.column_rect.span.left, g.column_rect.span.right + 1)
                assert all((x, y) in pset for y in ys)
        plan1, _ = ms.strategy1_crossing(MID, 2, eta, 1.0, seed)
        assert len(plan1.layer_choice) == 2 and not plan1.gadgets


def test_zero_field_makes_no_switches():
    eta = np.zeros(np.add(MID.dims(2), 1))
    for seed in range(10):
        res, _ = ms.build_crossing(MID, 2, eta, 0.3, seed)
        assert res.switches == 0 and res.plan.gadgets == []


def test_recursive_gadgets_stay_connected():
    cfg = ms.DeskConfig(PARAMS, N=8, recursive_gap=1)
    modes = []
    for seed in range(40):
        eta = ms.sample_strip(cfg, 2, seed, 0)
        res, _ = ms.build_crossing(cfg, 2, eta, 1.5, seed)
        _check_crossing(res, eta, 1.5, cfg.dims(2)[0])
        modes += [g.mode for g in res.plan.gadgets]
    assert "recursive" in modes


@pytest.mark.parametrize("cfg", [MID, ms.DeskConfig(PARAMS, N=8, recursive_gap=1)])
def test_mirror_equivariance(cfg):
    h = cfg.dims(2)[1]
    for seed in range(25):
        eta = ms.sample_strip(cfg, 2, seed, 0)
        a, _ = ms.build_crossing(cfg, 2, eta, 1.2, seed)
        b, _ = ms.build_crossing(cfg, 2, eta[:, ::-1], 1.2, seed, mirror=True)
        assert a.weight == b.weight
        mirrored = a.pts.copy()
        mirrored[:, 1] = h - mirrored[:, 1]
        assert np.array_equal(mirrored, b.pts)


def test_strategy_one_layers_uniform():
    n = 2000
    first = []
    for seed in range(n):
        eta = np.zeros(np.add(SMALL.dims(1), 1))
        plan, _ = ms.strategy1_crossing(SMALL, 1, eta, 0.0, seed)
        first.append(plan.layer_choice[0] == 1)
    p = np.mean(first)
    assert abs(p - 0.5) < 3 * math.sqrt(0.25 / n)


def test_strategy_two_layers_uniform():
    n = 600
    ones = []
    for seed in range(n):
        eta = ms.sample_strip(SMALL, 2, seed, 0)
        plan, _ = ms.strategy2_crossing(SMALL, 2, eta, 1.0, seed)
        ones.append(plan.layer_choice[0] == 1)
    p = np.mean(ones)
    assert abs(p - 0.5) < 3 * math.sqrt(0.25 / n)


def test_recursive_run_flat_ratio_and_schema():
    stats, rows = ms.recursive_run(PARAMS, 2, 0.0, 6, 1, N=16)
    for s in stats[1:]:
        assert 2.0 <= s.ratio <= 2.0 + 2 * PARAMS.delta
        assert s.d_join_mean <= s.d_mean
    csv = ms.rows_to_csv(rows).splitlines()
    assert csv[0] == "level,replicate,d,d_join,switches"
    assert len(csv) == 1 + 3 * 6


def test_recursive_run_switch_cap_and_gadget_share():
    gamma = 0.3
    stats, _ = ms.recursive_run(PARAMS, 2, gamma, 6, 2, N=8)
    for s in stats:
        assert s.switches_max <= 3 * PARAMS.alpha
        if s.level > 0:
            period = 200 * PARAMS.m_Gamma
            assert s.d_join_mean / s.d_mean <= 8 * math.log(1 / PARAMS.delta) * (s.level % period + 1) * gamma ** 2


def test_recursive_run_thread_independent():
    a = ms.recursive_run(PARAMS, 2, 0.5, 5, 3, N=8, threads=1)
    b = ms.recursive_run(PARAMS, 2, 0.5, 5, 3, N=8, threads=3)
    assert ms.rows_to_csv(a[1]) == ms.rows_to_csv(b[1])
    for x, y in zip(a[0], b[0]):
        # level 0 has no ratio, so nan fields compare equal here
        assert np.array_equal([x.d_mean, x.d_se, x.ratio, x.ratio_se],
                              [y.d_mean, y.d_se, y.ratio, y.ratio_se], equal_nan=True)


def test_recursive_run_errors():
    with pytest.raises(ValueError):
        ms.recursive_run(PARAMS, 0, 0.3, 2, 0)
    with pytest.raises(ValueError):
        ms.recursive_run(PARAMS, 5, 0.3, 2, 0)
    with pytest.raises(ResourceError):
        ms.recursive_run(PARAMS, 2, 0.3, 10, 0, N=16, budget=1000)
