import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfpp import gff, kernels
from lfpp.errors import GeometryError, NumericalError
from lfpp.geometry import IntervalZ, RectRegion


def empirical_cov_z(samples: np.ndarray, G: np.ndarray) -> float:
    """Largest entrywise z-score of the empirical covariance against ``G``."""
    n = samples.shape[0]
    prod = samples[:, :, None] * samples[:, None, :]
    mean = prod.mean(axis=0)
    se = prod.std(axis=0, ddof=1) / math.sqrt(n)
    return float(np.max(np.abs(mean - G) / se))


def interior(vals: np.ndarray) -> np.ndarray:
    return vals[:, 1:-1, 1:-1].reshape(vals.shape[0], -1)


@pytest.mark.parametrize("method", gff.METHODS)
def test_sampler_covariance_small(method):
    cov = gff.CovModel.box(6, 5)
    vals = gff.sample_values(cov, 11, range(20000), method)
    assert np.all(vals[:, 0, :] == 0) and np.all(vals[:, -1, :] == 0)
    assert np.all(vals[:, :, 0] == 0) and np.all(vals[:, :, -1] == 0)
    assert empirical_cov_z(interior(vals), cov.table().values) < 5.0


@pytest.mark.parametrize("method", gff.METHODS)
def test_single_point_variance(method):
    cov = gff.CovModel.box(2, 2)
    x = gff.sample_values(cov, 5, range(100000), method)[:, 1, 1]
    se = x.var() * math.sqrt(2.0 / len(x))
    assert abs(x.var() - 1.0) < 3 * se
    assert abs(x.mean()) < 3 * x.std() / math.sqrt(len(x))


def test_sampling_is_deterministic_per_replicate():
    cov = gff.CovModel.box(9, 7)
    for method in gff.METHODS:
        a = gff.sample_values(cov, 3, [4, 5], method)
        b = gff.sample_values(cov, 3, [5], method)
        assert np.array_equal(a[1], b[0])
        c = gff.sample_values(cov, 4, [5], method)
        assert not np.array_equal(b, c)


def test_sample_field_stream():
    cov = gff.CovModel.box(4, 4)
    items = list(gff.sample_field(cov, 2, 5, start=3, chunk=2))
    assert [s.replicate for s in items] == [3, 4, 5, 6, 7]
    ref = gff.sample_values(cov, 2, [6], "cholesky")[0]
    assert np.array_equal(items[3].values, ref)


def test_cholesky_factor_exact():
    cov = gff.CovModel.box(10, 8)
    L = cov.cholesky()
    assert np.abs(L @ L.T - cov.table().values).max() < 1e-10


def test_precision_inverse_matches_green():
    M, N = 16, 16
    D = gff.edge_incidence(M, N)
    Q = 0.25 * (D.T @ D).toarray()
    G = kernels.greens_via_solve(RectRegion.box(M, N)).values
    assert np.abs(np.linalg.inv(Q) - G).max() < 1e-10
    assert np.abs(Q - kernels.walk_operator(M, N).toarray()).max() < 1e-15


def test_reflection_symmetry_of_covariance():
    cov = gff.CovModel.box(7, 6)
    G = cov.table()
    k = cov.kernel
    for u in map(tuple, k.interior_points()):
        for w in map(tuple, k.interior_points()):
            assert G((u[0], 6 - u[1]), (w[0], 6 - w[1])) == pytest.approx(G(u, w), abs=1e-12)


def test_field_sample_csv(tmp_path):
    cov = gff.CovModel.box(3, 2)
    s = next(gff.sample_field(cov, 1, 1))
    p = tmp_path / "f.csv"
    s.to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "# region=3x2 seed=1 replicate=0"
    assert lines[1] == "x,y,value"
    assert len(lines) == 2 + 4 * 3
    x, y, v = lines[2 + 1 * 3 + 1].split(",")
    assert (int(x), int(y)) == (1, 1) and float(v) == pytest.approx(s.values[1, 1], rel=1e-11)


def test_field_sample_shape_check():
    with pytest.raises(GeometryError):
        gff.FieldSample(RectRegion.box(3, 3), np.zeros((3, 3)))


# ---------------------------------------------------------------- Markov decomposition

def test_decompose_whole_region():
    cov = gff.CovModel.box(8, 6)
    s = next(gff.sample_field(cov, 0, 1))
    coarse, fine = gff.markov_decompose(s, cov.region)
    assert np.abs(coarse.values).max() < 1e-14
    assert np.allclose(fine.values, s.values)


def test_decompose_properties():
    region = RectRegion.box(12, 10)
    sub = RectRegion.box(6, 5, 3, 2)
    s = next(gff.sample_field(gff.CovModel(region), 4, 1))
    coarse, fine = gff.markov_decompose(s, sub)
    assert np.allclose(coarse.values + fine.values, s.restrict(sub).values)
    # fine part vanishes on the sub boundary
    f = fine.values
    assert np.abs(np.concatenate([f[0], f[-1], f[:, 0], f[:, -1]])).max() < 1e-14
    # coarse part is discrete harmonic inside
    c = coarse.values
    lap = c[1:-1, 1:-1] - 0.25 * (c[2:, 1:-1] + c[:-2, 1:-1] + c[1:-1, 2:] + c[1:-1, :-2])
    assert np.abs(lap).max() < 1e-12
    # idempotent on the coarse part
    again, rest = gff.markov_decompose(coarse, sub)
    assert np.allclose(again.values, coarse.values, atol=1e-13)
    assert np.abs(rest.values).max() < 1e-13


def test_decomposition_covariances_exact():
    region = RectRegion.box(12, 10)
    for sub in (RectRegion.box(6, 5, 3, 2), RectRegion.box(12, 4, 0, 3), RectRegion.box(4, 4, 1, 1)):
        cross, fine, _ = gff.decomposition_covariances(region, sub)
        assert np.abs(cross).max() < 1e-10
        G_sub = kernels.greens_via_solve(RectRegion.box(sub.M, sub.N)).values
        assert np.abs(fine - G_sub).max() < 1e-10


def test_decompose_outside_rejected():
    s = next(gff.sample_field(gff.CovModel.box(5, 5), 0, 1))
    with pytest.raises(GeometryError):
        gff.markov_decompose(s, RectRegion.box(4, 4, 3, 3))


def test_coarse_functional():
    region = RectRegion.box(10, 8)
    sub = RectRegion.box(5, 4, 2, 2)
    s = next(gff.sample_field(gff.CovModel(region), 9, 1))
    coarse, _ = gff.markov_decompose(s, sub)
    rng = np.random.default_rng(0)
    wts = np.zeros(sub.shape)
    wts[1:-1, 1:-1] = rng.normal(size=(sub.M - 1, sub.N - 1))
    pts, w = gff.coarse_functional(sub, wts)
    lhs = float(np.sum(wts * coarse.values))
    rhs = float(sum(wz * s.at(tuple(z)) for z, wz in zip(pts, w)))
    assert lhs == pytest.approx(rhs, abs=1e-12)


# ---------------------------------------------------------------- line sums

def test_line_sum_basic():
    cov = gff.CovModel.box(9, 6)
    s = next(gff.sample_field(cov, 3, 1))
    assert gff.line_sum(s, IntervalZ(4, 4), 2).value == pytest.approx(s.at((4, 2)))
    whole = gff.line_sum(s, IntervalZ(1, 7), 3).value
    parts = gff.line_sum(s, IntervalZ(1, 3), 3).value + gff.line_sum(s, IntervalZ(4, 7), 3).value
    assert whole == pytest.approx(parts, abs=1e-13)
    with pytest.raises(GeometryError):
        gff.line_sum(s, IntervalZ(0, 3), 3)


def test_line_sum_zero_mean():
    cov = gff.CovModel.box(12, 6)
    vals = gff.sample_values(cov, 8, range(10000))
    z = vals[:, 2:9, 3].sum(axis=1)
    assert abs(z.mean()) < 3 * z.std(ddof=1) / math.sqrt(len(z))
    var_exact = gff.line_sum_var_exact(12, 6, IntervalZ(2, 8), 3)
    se = var_exact * math.sqrt(2.0 / len(z))
    assert abs(z.var() - var_exact) < 5 * se


def test_line_sum_variance_routes_agree():
    M, N, I, y = 60, 8, IntervalZ(10, 49), 4
    a = gff.line_sum_var_exact(M, N, I, y)
    b = gff.line_sum_var_per_source(M, N, I, y)
    c = gff.line_sum_var_exact(M, N, I, y, method="cg")
    assert a == pytest.approx(b, rel=1e-10)
    assert a == pytest.approx(c, rel=1e-8)


@given(st.integers(2, 8), st.integers(1, 120), st.data())
@settings(max_examples=30, deadline=None)
def test_line_sum_upper_bound(N, size, data):
    y = data.draw(st.integers(1, N - 1))
    M = size + 2 * N + 2
    left = N + 1
    v = gff.line_sum_var_exact(M, N, IntervalZ(left, left + size - 1), y)
    _, upper = gff.line_sum_bounds(N, size, y / N)
    assert 0 < v <= upper * (1 + 1e-12)


def test_line_sum_cov_nonnegative_and_decaying():
    N = 6
    M = 40 * N
    I1 = IntervalZ(N, 5 * N)
    covs = []
    for d in (2 * N, 4 * N, 8 * N):
        I2 = IntervalZ(I1.right + d, I1.right + d + 4 * N)
        covs.append(gff.line_sum_cov(M, N, I1, N // 2, I2, N // 3))
    assert all(c >= 0 for c in covs)
    assert covs[0] > covs[1] > covs[2]
    C = covs[0] / (N * math.exp(-math.pi * 2 * N / (4 * N)))
    for d, c in zip((2 * N, 4 * N, 8 * N), covs):
        assert c <= C * N * math.exp(-math.pi * d / (4 * N)) * (1 + 1e-9)


# ---------------------------------------------------------------- Gram-Schmidt

def test_gram_identity():
    res = gff.sequential_decorrelate(np.eye(6))
    assert np.allclose(res.residual_norms, 1.0)


def test_gram_against_cholesky():
    rng = np.random.default_rng(2)
    spec = gff.random_gram_spec(30, 0.2, 0.45, rng)
    assert spec.admissible()
    res = gff.sequential_decorrelate(spec)
    assert np.allclose(res.residual_norms, gff.cholesky_residuals(spec.inner), atol=1e-13)


def test_gram_singular_raises():
    with pytest.raises(NumericalError):
        gff.sequential_decorrelate(np.ones((3, 3)))


def _bounded_y(spec, A2, A3, rng):
    n = spec.n
    i = np.arange(1, n + 1)
    b = rng.uniform(-1, 1, n) * A2 * spec.rho ** (n - i - 1.0)
    b[-2:] = rng.uniform(-1, 1, 2) * A3
    return b


@given(st.integers(3, 50), st.floats(0.01, 0.249), st.floats(0.05, 1.0), st.integers(0, 2 ** 31))
@settings(max_examples=60, deadline=None)
def test_gram_bounds_property(n, rho, a1_frac, seed):
    rng = np.random.default_rng(seed)
    A1 = a1_frac * 0.1 / rho * 0.999
    spec = gff.random_gram_spec(n, rho, A1, rng)
    assert spec.admissible()
    A2, A3 = 1.0, 0.5
    y = _bounded_y(spec, A2, A3, rng)
    res = gff.sequential_decorrelate(spec, y)
    bd = gff.gram_bounds(spec, A2, A3)
    assert np.all(res.residual_norms <= 1 + 1e-12)
    assert np.all(res.residual_norms >= bd["residual_lower"] - 1e-12)
    assert np.all(np.abs(res.y_inner[: n - 2]) <= bd["y_early"] + 1e-12)
    assert np.all(np.abs(res.y_inner[n - 2:]) <= bd["y_late"] + 1e-12)
    assert np.all(np.abs(res.proj_inner) <= bd["proj"] + 1e-12)


def test_decorrelate_line_sums_trivial_and_far():
    _, _, r = gff.decorrelate_line_sums(np.array([[2.5]]))
    assert r[0] == pytest.approx(1.0, abs=1e-15)
    N, L = 4, 32
    M = 4 * L + 12 * N
    I1 = IntervalZ(N, N + L - 1)
    I2 = IntervalZ(I1.right + 4 * N, I1.right + 4 * N + L - 1)
    c = np.array([[gff.line_sum_cov(M, N, a, 2, b, 2) for b in (I1, I2)] for a in (I1, I2)])
    _, var, r = gff.decorrelate_line_sums(c)
    assert r.min() >= 0.999
    assert var[1] == pytest.approx(c[1, 1] * r[1])


def test_decorrelate_adjacent_intervals():
    N, beta = 4, 32
    L = beta * N
    n = 4
    M = n * L + 2 * N
    ivs = [IntervalZ(N + j * L, N + (j + 1) * L - 1) for j in range(n)]
    c = np.array([[gff.line_sum_cov(M, N, a, 2, b, 2) for b in ivs] for a in ivs])
    T, var, r = gff.decorrelate_line_sums(c)
    assert r.min() >= 1 - 10 / beta ** 2
    # residuals are uncorrelated
    rc = T @ c @ T.T
    assert np.abs(rc - np.diag(np.diag(rc))).max() < 1e-8 * np.abs(rc).max()
