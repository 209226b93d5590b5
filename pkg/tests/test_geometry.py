import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfpp.errors import DegenerateScaleError, GeometryError
from lfpp.geometry import (IntervalZ, RectRegion, ScaleParams, covering, partition,
                           principal_intervals, scale_length, solve_delta, tile_level,
                           tilde_rect)


def test_solve_delta_m1_closed_form():
    assert solve_delta(1) == pytest.approx(math.sqrt(2) - 1, abs=1e-14)


def test_solve_delta_m2_value():
    d = solve_delta(2)
    assert d == pytest.approx(0.20556943, abs=1e-8)
    assert abs(d * (2 + d) ** 2 - 1) < 1e-12


def test_solve_delta_m6_residual():
    # the root is 0.0149425...; the residual criterion is what is frozen here
    d = solve_delta(6)
    assert abs(d * (2 + d) ** 6 - 1) < 1e-12
    assert d == pytest.approx(0.0149425260826, abs=1e-12)


@pytest.mark.parametrize("m", range(1, 9))
def test_solve_delta_residual_all_m(m):
    d = solve_delta(m)
    assert d > 0
    assert abs(d * (2 + d) ** m - 1) < 1e-12


def test_solve_delta_rejects_zero():
    with pytest.raises(ValueError):
        solve_delta(0)


def test_a_m_equals_inverse_delta():
    p = ScaleParams.from_m(3)
    assert scale_length(p, p.m) == pytest.approx(1 / p.delta, rel=1e-12)


def test_scale_length_examples():
    p = ScaleParams.from_m(2)
    assert scale_length(p, 0) == 1.0
    assert scale_length(ScaleParams(0.5, 1), 1) == 2.5
    with pytest.raises(OverflowError):
        scale_length(p, 10 ** 4)


def test_gamma_derived_from_m_gamma():
    p = ScaleParams.from_m(2, m_Gamma=3)
    assert p.Gamma == (2 + p.delta) ** 3


@given(st.integers(1, 6), st.floats(0.05, 1.5))
@settings(max_examples=50, deadline=None)
def test_regime_invariant(m, gamma):
    p = ScaleParams.regime(m, gamma)
    g = p.Gamma * gamma ** 2
    # the smallest admissible m_Gamma may still exceed alpha*base when m_Gamma is clamped at 1
    if p.m_Gamma > 1:
        assert p.in_regime()
    assert g >= p.alpha * (1 - 1e-12)


def test_interval_invariants():
    with pytest.raises(GeometryError):
        IntervalZ(3, 2)
    iv = IntervalZ(2, 7)
    assert iv.length == 5 and iv.size == 6
    assert list(iv.points()) == [2, 3, 4, 5, 6, 7]


def test_rect_region_basics():
    r = RectRegion.box(4, 3, 1, 2)
    assert r.shape == (5, 4) and r.M == 4 and r.N == 3 and r.origin == (1, 2)
    assert r.contains((5, 5)) and not r.contains((6, 5))
    assert r.is_interior((2, 3)) and not r.is_interior((1, 3))
    assert r.mirror_x(10).base == IntervalZ(5, 9)


def test_partition_d0_single_piece():
    p = ScaleParams.from_m(2)
    out = partition(p, 3, 1.0, 0.5, 0)
    assert len(out) == 1 and out[0].principal
    assert out[0].length == pytest.approx(scale_length(p, 3))


def test_partition_d1_three_pieces():
    p = ScaleParams.from_m(2)
    out = partition(p, 3, 2.0, 0.0, 1)
    lens = [iv.length for iv in out]
    assert lens == pytest.approx([2 * scale_length(p, 2), 2 * scale_length(p, 0), 2 * scale_length(p, 2)])
    assert [iv.principal for iv in out] == [True, False, True]


@given(st.integers(1, 4), st.integers(0, 10), st.floats(0.5, 4.0), st.floats(-5, 5), st.integers(-3, 6))
@settings(max_examples=80, deadline=None)
def test_partition_tiles_parent(m, d, k, x, ell):
    p = ScaleParams.from_m(m)
    out = partition(p, ell, k, x, d)
    total = k * scale_length(p, ell)
    assert out[0].left == x
    assert out[-1].right == pytest.approx(x + total, rel=1e-12)
    for a, b in zip(out, out[1:]):
        assert b.left == pytest.approx(a.right, rel=1e-12, abs=1e-12)
    assert sum(iv.length for iv in out) == pytest.approx(total, rel=1e-9)
    for iv in out:
        assert iv.length == pytest.approx(k * scale_length(p, iv.depth), rel=1e-9)
    assert len(out) <= (2 + p.delta) ** (d + m) * (1 + 1e-12)


def _union_points(cover):
    pts = set()
    for iv, _, _ in cover:
        pts.update(iv.points())
    return pts


def test_covering_d0():
    p = ScaleParams.from_m(2)
    cov = covering(p, 3, 1.0, 4, 0)
    assert cov == [(IntervalZ(4, 4 + math.floor(scale_length(p, 3))), 3, True)]


def test_covering_d1_reference_instance():
    # (ell, k, x, m) = (3, 1, 0, 2): lengths a_3 = 10.73, a_2 = 4.87, a_0 = 1
    p = ScaleParams.from_m(2)
    cov = covering(p, 3, 1.0, 0, 1)
    assert [c[0] for c in cov] == [IntervalZ(0, 4), IntervalZ(5, 6), IntervalZ(6, 10)]
    assert _union_points(cov) == set(range(11))
    for (a, _, _), (b, _, _) in zip(cov, cov[1:]):
        assert len(set(a.points()) & set(b.points())) <= 2


@given(st.integers(1, 3), st.integers(2, 7), st.integers(0, 3), st.sampled_from([1.0, 1.5, 2.0, 4.87]),
       st.integers(-20, 20))
@settings(max_examples=120, deadline=None)
def test_covering_properties(m, ell, d, k, x):
    p = ScaleParams.from_m(m)
    if k * scale_length(p, ell - d) < 2:
        with pytest.raises(DegenerateScaleError):
            covering(p, ell, k, x, d)
        return
    cov = covering(p, ell, k, x, d)
    full = math.floor(k * scale_length(p, ell))
    assert _union_points(cov) == set(range(x, x + full + 1))
    want = math.floor(k * scale_length(p, ell - d)) + 1
    for iv in principal_intervals(cov):
        assert iv.size == want
    for (a, _, _), (b, _, _) in zip(cov, cov[1:]):
        assert a.left <= b.left
        assert len(set(a.points()) & set(b.points())) <= 2


def test_tile_level_counts_and_containment():
    p = ScaleParams.from_m(2, m_Gamma=2)
    ell = 7
    kids = tile_level(p, ell)
    roles = [c.role[0] for c in kids]
    assert roles.count("copy") == 4
    assert roles.count("principal") == 8
    assert roles.count("mid") == 2 * 2 ** p.m
    parent = tilde_rect(p, ell)
    assert all(parent.contains_rect(c.rect) for c in kids)


def test_tile_level_mirror_symmetry():
    p = ScaleParams.from_m(2, m_Gamma=2)
    ell = 7
    kids = tile_level(p, ell)
    parent = tilde_rect(p, ell)
    axis = parent.base.left + parent.base.right
    rects = {c.rect for c in kids}
    mirrored = {c.rect.mirror_x(axis) for c in kids}
    assert rects == mirrored


def test_tile_level_degenerate():
    with pytest.raises(DegenerateScaleError):
        tile_level(ScaleParams.from_m(2, m_Gamma=2), 2)
