"""Discrete Gaussian free field on lattice rectangles.

Field arrays cover the closed rectangle: ``values[i, j]`` is the field at
``(x0 + i, y0 + j)``.  Boundary entries are zero for a field with Dirichlet
boundary; coarse parts of a decomposition carry the parent's boundary data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse as sp

from . import kernels
from .errors import GeometryError, NumericalError, ResourceError
from .geometry import IntervalZ, RectRegion
from .kernels import GreenTable, RectKernel
from .rng import stream

METHODS = ("cholesky", "precision", "spectral")


@dataclass
class FieldSample:
    region: RectRegion
    values: np.ndarray
    seed: int = 0
    replicate: int = 0

    def __post_init__(self):
        if self.values.shape[-2:] != self.region.shape:
            raise GeometryError(f"values shape {self.values.shape} does not match region {self.region.shape}")

    def at(self, p) -> float:
        x0, y0 = self.region.origin
        return self.values[..., p[0] - x0, p[1] - y0]

    def restrict(self, sub: RectRegion) -> "FieldSample":
        if not self.region.contains_rect(sub):
            raise GeometryError("sub-rectangle is not inside the sample region")
        x0, y0 = self.region.origin
        sx, sy = sub.origin
        vals = self.values[..., sx - x0: sx - x0 + sub.shape[0], sy - y0: sy - y0 + sub.shape[1]]
        return FieldSample(sub, vals, self.seed, self.replicate)

    def to_csv(self, path) -> None:
        M, N = self.region.M, self.region.N
        x0, y0 = self.region.origin
        with open(path, "w") as fh:
            fh.write(f"# region={M}x{N} seed={self.seed} replicate={self.replicate}\n")
            fh.write("x,y,value\n")
            for i in range(M + 1):
                for j in range(N + 1):
                    fh.write(f"{x0 + i},{y0 + j},{self.values[i, j]:.12g}\n")


@dataclass
class CovModel:
    """Dirichlet GFF law on ``region``; the Green table is built on demand."""

    region: RectRegion
    green: GreenTable | None = None
    _chol: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def box(cls, M: int, N: int) -> "CovModel":
        return cls(RectRegion.box(M, N))

    @property
    def kernel(self) -> RectKernel:
        return RectKernel(self.region.M, self.region.N)

    def table(self) -> GreenTable:
        if self.green is None:
            self.green = kernels.greens_via_solve(self.region)
        return self.green

    def cholesky(self) -> np.ndarray:
        if self._chol is None:
            try:
                self._chol = np.linalg.cholesky(self.table().values)
            except np.linalg.LinAlgError as exc:
                raise NumericalError("Green matrix is not positive definite") from exc
        return self._chol


# --------------------------------------------------------------------------
# sampling

def edge_incidence(M: int, N: int) -> sp.csr_matrix:
    """Signed incidence of the edges with at least one interior endpoint.

    Columns are interior points; ``D.T @ D`` is the Dirichlet graph Laplacian.
    """
    k = RectKernel(M, N)
    rows, cols, vals = [], [], []
    e = 0
    for x in range(M + 1):
        for y in range(N + 1):
            for nx, ny in ((x + 1, y), (x, y + 1)):
                if nx > M or ny > N:
                    continue
                a_in = k.is_interior((x, y))
                b_in = k.is_interior((nx, ny))
                if not (a_in or b_in):
                    continue
                if a_in:
                    rows.append(e); cols.append(k.index((x, y))); vals.append(1.0)
                if b_in:
                    rows.append(e); cols.append(k.index((nx, ny))); vals.append(-1.0)
                e += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(e, k.n_interior))


def spectral_eigenvalues(M: int, N: int) -> np.ndarray:
    j = np.arange(1, M)[:, None]
    kk = np.arange(1, N)[None, :]
    return 1.0 - 0.5 * (np.cos(j * math.pi / M) + np.cos(kk * math.pi / N))


def _embed(M: int, N: int, interior: np.ndarray) -> np.ndarray:
    lead = interior.shape[:-1]
    out = np.zeros(lead + (M + 1, N + 1))
    out[..., 1:M, 1:N] = interior.reshape(lead + (M - 1, N - 1))
    return out


def sample_values(cov: CovModel, seed: int, replicates, method: str = "spectral",
                  key: tuple = ()) -> np.ndarray:
    """Field arrays for the given replicate indices, shape ``(R, M+1, N+1)``.

    Replicate ``r`` always draws from the stream keyed by ``(seed, *key, r)``,
    so the result for a replicate does not depend on which others are requested.
    """
    if method not in METHODS:
        raise ValueError(f"unknown sampling method {method!r}")
    M, N = cov.region.M, cov.region.N
    n = (M - 1) * (N - 1)
    reps = list(replicates)
    xi = np.empty((len(reps), n))
    for i, r in enumerate(reps):
        xi[i] = stream(seed, *key, r).standard_normal(n)
    if method == "cholesky":
        if n > kernels.DENSE_LIMIT:
            raise ResourceError(f"Cholesky sampling limited to {kernels.DENSE_LIMIT} interior points")
        L = cov.cholesky()
        # one product per replicate: batched GEMM rounding depends on the batch
        inner = np.stack([L @ row for row in xi]) if reps else np.empty((0, n))
    elif method == "spectral":
        lam = spectral_eigenvalues(M, N)
        grid = xi.reshape(len(reps), M - 1, N - 1) / np.sqrt(lam)
        inner = scipy.fft.dstn(grid, type=1, norm="ortho", axes=(1, 2)).reshape(len(reps), n)
    else:
        D = edge_incidence(M, N)
        # Q = D^T D / 4, so Q^{-1} (D^T xi' / 2) has covariance Q^{-1}
        xe = np.stack([stream(seed, *key, r, 1).standard_normal(D.shape[0]) for r in reps])
        inner = kernels.green_apply((M, N), 0.5 * (D.T @ xe.T)).T
    return _embed(M, N, inner)


def sample_field(cov: CovModel, seed: int, count: int, method: str = "cholesky",
                 start: int = 0, chunk: int = 1024) -> Iterator[FieldSample]:
    """Yield ``count`` independent samples, replicates ``start .. start+count-1``."""
    if count < 0:
        raise ValueError("count must be non-negative")
    for lo in range(start, start + count, chunk):
        hi = min(start + count, lo + chunk)
        vals = sample_values(cov, seed, range(lo, hi), method)
        for i, r in enumerate(range(lo, hi)):
            yield FieldSample(cov.region, vals[i], seed, r)


# --------------------------------------------------------------------------
# Markov decomposition

def harmonic_extension(values: np.ndarray) -> np.ndarray:
    """Discrete harmonic function matching ``values`` on the rectangle boundary.

    ``values`` has shape ``(..., M+1, N+1)``; only boundary entries are read.
    """
    M, N = values.shape[-2] - 1, values.shape[-1] - 1
    out = np.array(values, dtype=float, copy=True)
    if M < 2 or N < 2:
        return out
    lead = values.shape[:-2]
    rhs = np.zeros(lead + (M - 1, N - 1))
    rhs[..., 0, :] += values[..., 0, 1:N]
    rhs[..., -1, :] += values[..., M, 1:N]
    rhs[..., :, 0] += values[..., 1:M, 0]
    rhs[..., :, -1] += values[..., 1:M, N]
    flat = 0.25 * rhs.reshape(-1, (M - 1) * (N - 1)).T
    sol = kernels.green_apply((M, N), flat).T
    out[..., 1:M, 1:N] = sol.reshape(lead + (M - 1, N - 1))
    return out


def markov_decompose(sample: FieldSample, sub: RectRegion):
    """Split the field on ``sub`` into coarse (harmonic) and fine (zero-boundary) parts."""
    if not sample.region.contains_rect(sub):
        raise GeometryError("sub-rectangle is not inside the sample region")
    local = sample.restrict(sub)
    coarse = harmonic_extension(local.values)
    fine = local.values - coarse
    return (FieldSample(sub, coarse, sample.seed, sample.replicate),
            FieldSample(sub, fine, sample.seed, sample.replicate))


def _selection(region: RectRegion, pts) -> sp.csr_matrix:
    """Rows pick region-interior coordinates of ``pts``; region-boundary points give zero rows."""
    k = RectKernel(region.M, region.N)
    x0, y0 = region.origin
    rows, cols = [], []
    for r, (x, y) in enumerate(pts):
        p = (x - x0, y - y0)
        if k.is_interior(p):
            rows.append(r)
            cols.append(k.index(p))
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(pts), k.n_interior))


def decomposition_covariances(region: RectRegion, sub: RectRegion):
    """Exact covariances of the decomposition on ``sub``'s interior.

    Returns ``(cross, fine, coarse)`` where ``cross[u, v] = Cov(fine_u, coarse_v)``.
    """
    if not region.contains_rect(sub):
        raise GeometryError("sub-rectangle is not inside the region")
    G = kernels.greens_via_solve(region).values
    ks = RectKernel(sub.M, sub.N)
    sx, sy = sub.origin
    inner = [(sx + x, sy + y) for x, y in ks.interior_points()]
    bpts = [(sx + x, sy + y) for x, y in ks.boundary_points()]
    S = _selection(region, inner)
    B = _selection(region, bpts)
    # harmonic-extension matrix from boundary values to interior values
    H = np.zeros((ks.n_interior, len(bpts)))
    for c, (bx, by) in enumerate(ks.boundary_points()):
        nb = ks.inner_neighbour((bx, by))
        H[ks.index(nb), c] = 0.25
    H = kernels.green_apply(ks, H)
    coarse_op = H @ B.toarray()
    fine_op = S.toarray() - coarse_op
    cross = fine_op @ G @ coarse_op.T
    fine = fine_op @ G @ fine_op.T
    coarse = coarse_op @ G @ coarse_op.T
    return cross, fine, coarse


def coarse_functional(sub: RectRegion, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Boundary weights ``w`` with ``sum_u weights[u] coarse_u = sum_z w[z] field_z``.

    ``weights`` is an array over ``sub``'s closed grid (interior entries used).
    Returns ``(boundary_points, w)`` in absolute coordinates.
    """
    ks = RectKernel(sub.M, sub.N)
    c = np.asarray(weights, dtype=float)[1:sub.M, 1:sub.N].reshape(-1)
    gc = kernels.green_apply(ks, c)
    bl = ks.boundary_points()
    w = np.array([0.25 * gc[ks.index(ks.inner_neighbour(tuple(z)))] for z in bl])
    # boundary entries of the weights pass through unchanged
    w = w + np.array([weights[z[0], z[1]] for z in bl])
    return bl + np.array(sub.origin), w


# --------------------------------------------------------------------------
# line sums

@dataclass(frozen=True)
class LineSum:
    interval: IntervalZ
    height: int
    value: float


def line_sum(sample: FieldSample, I: IntervalZ, nuN: int) -> LineSum:
    region = sample.region
    if not (region.is_interior((I.left, nuN)) and region.is_interior((I.right, nuN))):
        raise GeometryError(f"segment {I} x {{{nuN}}} is not inside the region interior")
    x0, y0 = region.origin
    vals = sample.values[..., I.left - x0: I.right - x0 + 1, nuN - y0]
    return LineSum(I, nuN, vals.sum(axis=-1))


def _indicator(M: int, N: int, I: IntervalZ, y: int) -> np.ndarray:
    k = RectKernel(M, N)
    if not (k.is_interior((I.left, y)) and k.is_interior((I.right, y))):
        raise GeometryError(f"segment {I} x {{{y}}} is not inside R_{M},{N}")
    vec = np.zeros(k.n_interior)
    for x in I.points():
        vec[k.index((x, y))] = 1.0
    return vec


def line_sum_cov(M: int, N: int, I1: IntervalZ, y1: int, I2: IntervalZ, y2: int,
                 method: str = "lu") -> float:
    """``Cov(Z_1, Z_2) = 1_1^T G 1_2`` on ``R_{M,N}`` with a single solve."""
    a = _indicator(M, N, I1, y1)
    b = _indicator(M, N, I2, y2)
    return float(a @ kernels.green_apply((M, N), b, method=method))


def line_sum_var_exact(M: int, N: int, I: IntervalZ, y: int, method: str = "lu") -> float:
    """Exact variance of the line sum over ``I x {y}`` on ``R_{M,N}``."""
    return line_sum_cov(M, N, I, y, I, y, method=method)


def line_sum_var_per_source(M: int, N: int, I: IntervalZ, y: int) -> float:
    """Same quantity as a double sum of Green's values, one solve per source."""
    k = RectKernel(M, N)
    src = [(x, y) for x in I.points()]
    cols = kernels.green_columns(k, src)
    idx = [k.index(p) for p in src]
    return float(cols[idx, :].sum())


def line_sum_bounds(N: int, size: int, nu: float) -> tuple[float, float]:
    """Lower and upper variance bounds for a line sum of ``size`` points at height ``nu N``."""
    upper = 4.0 * size * nu * (1 - nu) * N
    lower = 4.0 * (size - 201.0 * N * math.log(size / N)) * nu * (1 - nu) * N
    return lower, upper


# --------------------------------------------------------------------------
# Gram-Schmidt in an abstract inner-product space

@dataclass(frozen=True)
class GramSpec:
    inner: np.ndarray
    rho: float
    A1: float

    @property
    def n(self) -> int:
        return self.inner.shape[0]

    def admissible(self) -> bool:
        g = self.inner
        n = self.n
        dist = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        off = (np.abs(g) <= self.A1 * self.rho ** dist + 1e-15) | (dist == 0)
        return (bool(np.allclose(np.diag(g), 1.0)) and bool(np.allclose(g, g.T))
                and bool(off.all()) and 0 < self.rho < 0.25 and self.A1 * self.rho < 0.1)


def random_gram_spec(n: int, rho: float, A1: float, rng: np.random.Generator) -> GramSpec:
    """Random Gram matrix with ``|g_ij| <= A1 rho^|i-j|``.

    The constraints ``rho < 1/4`` and ``A1 rho < 0.1`` make every row strictly
    diagonally dominant, so the matrix is positive definite.
    """
    g = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            g[i, j] = g[j, i] = rng.uniform(-1, 1) * A1 * rho ** (j - i)
    return GramSpec(g, rho, A1)


@dataclass(frozen=True)
class GramResult:
    coeffs: np.ndarray          # row i: eps_i as a combination of x_1..x_n
    residual_norms: np.ndarray  # |eps_i|^2
    proj_inner: np.ndarray      # (xhat_i, xhat_j)
    y_inner: np.ndarray | None  # (y, eps_i)


def sequential_decorrelate(spec: GramSpec | np.ndarray, y_inner=None, tol: float = 1e-13) -> GramResult:
    """Classical Gram-Schmidt against earlier vectors, carried out on the Gram matrix."""
    g = spec.inner if isinstance(spec, GramSpec) else np.asarray(spec, dtype=float)
    n = g.shape[0]
    E = np.zeros((n, n))
    norms = np.zeros(n)
    for i in range(n):
        E[i, i] = 1.0
        for k in range(i):
            # (x_i, eps_k) / |eps_k|^2
            E[i] -= (g[i] @ E[k]) / norms[k] * E[k]
        norms[i] = E[i] @ g @ E[i]
        if norms[i] <= tol * g[i, i]:
            raise NumericalError(f"Gram matrix is numerically singular at index {i}")
    proj = np.eye(n) - E            # xhat_i = x_i - eps_i
    proj_inner = proj @ g @ proj.T
    y_eps = None if y_inner is None else E @ np.asarray(y_inner, dtype=float)
    return GramResult(E, norms, proj_inner, y_eps)


def gram_bounds(spec: GramSpec, A2: float, A3: float) -> dict:
    """The four Gram-Schmidt bounds as ``name -> threshold`` (or array of thresholds)."""
    n, rho, A1 = spec.n, spec.rho, spec.A1
    i = np.arange(1, n + 1)
    dist = np.abs(np.subtract.outer(i, i))
    return {
        "residual_lower": 1.0 - 4.0 * A1 ** 2 * rho ** 2 / (1.0 - rho ** 2),
        "y_early": 3.0 * A2 * rho ** (n - i[: n - 2] - 1.0),
        "y_late": 2.0 * A3 + 8.0 * A1 * A2 * rho ** 2,
        "proj": 4.0 * A1 ** 2 * rho ** (dist + 2.0) / (1.0 - rho ** 2),
    }


def decorrelate_line_sums(cov: np.ndarray):
    """Sequential residuals of correlated Gaussians with covariance ``cov``.

    Returns ``(transform, variances, ratios)``: ``transform @ eta`` gives the
    residuals (independent), ``variances`` their variances and ``ratios`` the
    residual-to-original variance ratios.
    """
    cov = np.asarray(cov, dtype=float)
    sd = np.sqrt(np.diag(cov))
    live = sd > 0
    n = cov.shape[0]
    transform = np.zeros((n, n))
    variances = np.zeros(n)
    ratios = np.ones(n)
    idx = np.flatnonzero(live)
    if idx.size:
        corr = cov[np.ix_(idx, idx)] / np.outer(sd[idx], sd[idx])
        res = sequential_decorrelate(corr)
        # undo the normalisation: eps_i (scaled by sd_i) in terms of eta
        T = res.coeffs * sd[idx][:, None] / sd[idx][None, :]
        transform[np.ix_(idx, idx)] = T
        variances[idx] = res.residual_norms * sd[idx] ** 2
        ratios[idx] = res.residual_norms
    return transform, variances, ratios


def cholesky_residuals(g: np.ndarray) -> np.ndarray:
    """``|eps_i|^2`` read off the Cholesky factor (independent route)."""
    L = scipy.linalg.cholesky(g, lower=True)
    return np.diag(L) ** 2
