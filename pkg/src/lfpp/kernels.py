"""Random-walk kernels on lattice rectangles.

Conventions: the rectangle ``R_{M,N}`` is ``[0, M] x [0, N]`` in the integer
lattice.  Interior points have all four neighbours inside; boundary points are
the remaining points that have an interior neighbour, so the four corners are
not boundary points.  Green's functions count the visit at time zero.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import IntegrationWarning, quad

from .errors import GeometryError, NumericalError, QuadratureError, ResourceError
from .geometry import RectRegion

EULER_GAMMA = 0.5772156649015329
POTENTIAL_CONST = (2.0 * EULER_GAMMA + math.log(8.0)) / math.pi
DENSE_LIMIT = 20_000


# --------------------------------------------------------------------------
# geometry helpers

@dataclass(frozen=True)
class RectKernel:
    M: int
    N: int

    def __post_init__(self):
        if self.M < 2 or self.N < 2:
            raise GeometryError("R_{M,N} needs M, N >= 2 to have an interior point")

    @property
    def n_interior(self) -> int:
        return (self.M - 1) * (self.N - 1)

    def is_interior(self, p) -> bool:
        return 0 < p[0] < self.M and 0 < p[1] < self.N

    def is_boundary(self, p) -> bool:
        x, y = p
        on_side = (x in (0, self.M) and 0 < y < self.N) or (y in (0, self.N) and 0 < x < self.M)
        return on_side

    def index(self, p) -> int:
        return (p[0] - 1) * (self.N - 1) + (p[1] - 1)

    def interior_points(self) -> np.ndarray:
        xs, ys = np.meshgrid(np.arange(1, self.M), np.arange(1, self.N), indexing="ij")
        return np.stack([xs.ravel(), ys.ravel()], axis=1)

    def boundary_points(self) -> np.ndarray:
        """Boundary points in the order left, right, bottom, top."""
        ys = np.arange(1, self.N)
        xs = np.arange(1, self.M)
        parts = [
            np.stack([np.zeros_like(ys), ys], 1),
            np.stack([np.full_like(ys, self.M), ys], 1),
            np.stack([xs, np.zeros_like(xs)], 1),
            np.stack([xs, np.full_like(xs, self.N)], 1),
        ]
        return np.concatenate(parts)

    def inner_neighbour(self, z):
        """The unique interior neighbour of a boundary point."""
        if not self.is_boundary(z):
            raise GeometryError(f"{tuple(z)} is not a boundary point of R_{self.M},{self.N}")
        x, y = z
        if x == 0:
            return (1, y)
        if x == self.M:
            return (self.M - 1, y)
        if y == 0:
            return (x, 1)
        return (x, self.N - 1)

    def _need_interior(self, p):
        if not self.is_interior(p):
            raise GeometryError(f"{tuple(p)} is not an interior point of R_{self.M},{self.N}")


def as_kernel(region) -> RectKernel:
    if isinstance(region, RectKernel):
        return region
    if isinstance(region, RectRegion):
        return RectKernel(region.M, region.N)
    M, N = region
    return RectKernel(int(M), int(N))


def walk_operator(M: int, N: int) -> sp.csc_matrix:
    """``I - P`` on the interior of ``R_{M,N}`` (P the killed walk)."""
    nx, ny = M - 1, N - 1
    ex = sp.diags([np.ones(nx - 1), np.ones(nx - 1)], [-1, 1], shape=(nx, nx))
    ey = sp.diags([np.ones(ny - 1), np.ones(ny - 1)], [-1, 1], shape=(ny, ny))
    adj = sp.kron(ex, sp.identity(ny)) + sp.kron(sp.identity(nx), ey)
    return (sp.identity(nx * ny) - 0.25 * adj).tocsc()


@lru_cache(maxsize=32)
def _factor(M: int, N: int):
    return spla.splu(walk_operator(M, N))


# --------------------------------------------------------------------------
# Poisson kernel from the sine series

def r_of(t):
    """``arccosh(2 - cos t)``, evaluated without cancellation near zero."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > math.pi + 1e-12):
        raise ValueError("r_of is defined on [0, pi]")
    u = 2.0 * np.sin(t / 2.0) ** 2
    out = np.log1p(u + np.sqrt(u * (u + 2.0)))
    return float(out) if out.ndim == 0 else out


def _sinh_ratio(r, num, den):
    """``sinh(r*num) / sinh(r*den)`` for ``0 <= num <= den`` in log space."""
    r = np.asarray(r, dtype=float)
    a = r * num
    b = r * den
    return np.exp(a - b) * (-np.expm1(-2.0 * a)) / (-np.expm1(-2.0 * b))


def _side_series(L: int, W: int, depth, along, target):
    """Exit density through one side of length W for a rectangle of depth L.

    ``depth`` is the distance of the start from the opposite side measured
    toward the exit side, ``along`` the coordinate parallel to the exit side.
    """
    j = np.arange(1, W)
    rj = r_of(j * math.pi / W)
    ratio = _sinh_ratio(rj, L - depth, L)
    s1 = np.sin(j * math.pi * along / W)
    target = np.atleast_1d(target)
    s2 = np.sin(np.outer(target, j) * math.pi / W)
    return (2.0 / W) * (s2 @ (ratio * s1))


def poisson_row(k, v):
    """Exit distribution from interior ``v``: ``(boundary_points, probabilities)``."""
    k = as_kernel(k)
    k._need_interior(v)
    x, y = v
    M, N = k.M, k.N
    ys = np.arange(1, N)
    xs = np.arange(1, M)
    left = _side_series(M, N, x, y, ys)
    right = _side_series(M, N, M - x, y, ys)
    bottom = _side_series(N, M, y, x, xs)
    top = _side_series(N, M, N - y, x, xs)
    return k.boundary_points(), np.concatenate([left, right, bottom, top])


def poisson_kernel(k, v, z) -> float:
    """Probability that the walk from ``v`` leaves ``R_{M,N}`` through ``z``."""
    k = as_kernel(k)
    k._need_interior(v)
    x, y = v
    zx, zy = z
    M, N = k.M, k.N
    if (zx, zy) in ((0, 0), (0, N), (M, 0), (M, N)):
        return 0.0
    if not k.is_boundary(z):
        raise GeometryError(f"{tuple(z)} is not on the boundary of R_{M},{N}")
    if zx == 0:
        return float(_side_series(M, N, x, y, zy)[0])
    if zx == M:
        return float(_side_series(M, N, M - x, y, zy)[0])
    if zy == 0:
        return float(_side_series(N, M, y, x, zx)[0])
    return float(_side_series(N, M, N - y, x, zx)[0])


def poisson_via_solve(k, v):
    """Harmonic-measure oracle: one Dirichlet solve per boundary point."""
    k = as_kernel(k)
    k._need_interior(v)
    lu = _factor(k.M, k.N)
    bpts = k.boundary_points()
    rhs = np.zeros((k.n_interior, len(bpts)))
    for c, z in enumerate(bpts):
        rhs[k.index(k.inner_neighbour(z)), c] = 0.25
    sol = lu.solve(rhs)
    return bpts, sol[k.index(v)]


# --------------------------------------------------------------------------
# potential kernel

def _potential_exact(x1: int, x2: int) -> float:
    x1, x2 = sorted((abs(int(x1)), abs(int(x2))))
    if x1 == 0 and x2 == 0:
        return 0.0

    def f(t):
        if t == 0.0:
            return float(x2)
        rt = float(r_of(t))
        e = math.exp(-x2 * rt)
        return (-math.expm1(-x2 * rt) + e * 2.0 * math.sin(x1 * t / 2.0) ** 2) / math.sinh(rt)

    pts = np.linspace(0.0, math.pi, x1 + 1)[1:-1] if x1 > 4 else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(f, 0.0, math.pi, limit=4000, epsabs=1e-15, epsrel=1e-14, points=pts)
    if err > 1e-9:
        raise NumericalError(f"potential kernel integral at ({x1},{x2}) has error {err:.2e}")
    return 2.0 / math.pi * val


_potential_cache = lru_cache(maxsize=None)(_potential_exact)


def potential_kernel(x, mode: str = "approx") -> float:
    """Potential kernel of the planar walk.

    ``approx`` returns ``(2/pi) log|x| + (2 gamma + log 8)/pi``.  ``exact``
    evaluates the one-dimensional Fourier integral obtained by integrating the
    lattice characteristic function over one angle in closed form; it is
    accurate to about 1e-13.
    """
    x1, x2 = int(x[0]), int(x[1])
    if x1 == 0 and x2 == 0:
        return 0.0
    if mode == "approx":
        return 2.0 / math.pi * math.log(math.hypot(x1, x2)) + POTENTIAL_CONST
    if mode == "exact":
        a, b = sorted((abs(x1), abs(x2)))
        return _potential_cache(a, b)
    raise ValueError(f"unknown mode {mode!r}")


def greens_via_kernel(k, u, w, mode: str = "exact") -> float:
    """Green's function from the exit distribution and the potential kernel."""
    k = as_kernel(k)
    k._need_interior(u)
    k._need_interior(w)
    bpts, probs = poisson_row(k, u)
    avals = np.array([potential_kernel((zx - w[0], zy - w[1]), mode) for zx, zy in bpts])
    return float(probs @ avals - potential_kernel((u[0] - w[0], u[1] - w[1]), mode))


# --------------------------------------------------------------------------
# Green's function by linear algebra

@dataclass(frozen=True)
class GreenTable:
    region: RectRegion
    values: np.ndarray

    @property
    def kernel(self) -> RectKernel:
        return RectKernel(self.region.M, self.region.N)

    def __call__(self, u, w) -> float:
        """Look up ``G(u, w)`` in the region's own coordinates."""
        x0, y0 = self.region.origin
        k = self.kernel
        uu = (u[0] - x0, u[1] - y0)
        ww = (w[0] - x0, w[1] - y0)
        if not (k.is_interior(uu) and k.is_interior(ww)):
            return 0.0
        return float(self.values[k.index(uu), k.index(ww)])


def greens_via_solve(region, dense_limit: int = DENSE_LIMIT) -> GreenTable:
    """Dense Green's matrix ``(I - P)^{-1}`` on the interior."""
    if not isinstance(region, RectRegion):
        k = as_kernel(region)
        region = RectRegion.box(k.M, k.N)
    k = as_kernel(region)
    n = k.n_interior
    if n > dense_limit:
        raise ResourceError(f"{n} interior points exceed the dense limit {dense_limit}")
    lu = _factor(k.M, k.N)
    G = lu.solve(np.eye(n))
    G = 0.5 * (G + G.T)
    return GreenTable(region, G)


def green_columns(k, sources, method: str = "lu", tol: float = 1e-10) -> np.ndarray:
    """Columns ``G(., s)`` for a list of interior sources (shape n_interior x len)."""
    k = as_kernel(k)
    idx = [k.index(s) for s in sources]
    rhs = np.zeros((k.n_interior, len(idx)))
    rhs[idx, np.arange(len(idx))] = 1.0
    return green_apply(k, rhs, method=method, tol=tol)


def green_apply(k, rhs: np.ndarray, method: str = "lu", tol: float = 1e-10) -> np.ndarray:
    """``G @ rhs`` by sparse LU or by conjugate gradients."""
    k = as_kernel(k)
    if method == "lu":
        return _factor(k.M, k.N).solve(np.asarray(rhs, dtype=float))
    A = walk_operator(k.M, k.N)
    rhs = np.asarray(rhs, dtype=float)
    cols = rhs.reshape(rhs.shape[0], -1)
    out = np.empty_like(cols)
    for c in range(cols.shape[1]):
        sol, info = spla.cg(A, cols[:, c], rtol=tol, atol=0.0, maxiter=20 * A.shape[0])
        if info != 0:
            raise NumericalError(f"conjugate gradients did not converge (info={info})")
        out[:, c] = sol
    return out.reshape(rhs.shape)


def green_spectral(k, u, w) -> float:
    """Green's function by separation of variables (sine modes in y)."""
    k = as_kernel(k)
    k._need_interior(u)
    k._need_interior(w)
    M, N = k.M, k.N
    j = np.arange(1, N)
    rj = r_of(j * math.pi / N)
    lo, hi = sorted((u[0], w[0]))
    # sinh(r lo) sinh(r (M - hi)) / (sinh r sinh(r M)) in log space
    a, b, c = rj * lo, rj * (M - hi), rj * M
    g = np.exp(a + b - c) * (-np.expm1(-2 * a)) * (-np.expm1(-2 * b)) / (-np.expm1(-2 * c))
    g = g / (2.0 * np.sinh(rj))
    modes = np.sin(j * math.pi * u[1] / N) * np.sin(j * math.pi * w[1] / N)
    return float((8.0 / N) * np.sum(modes * g))


def reversibility_check(k, v, z, green: GreenTable | None = None):
    """Return ``(H(v, z), G(z_R, v) / 4)``; the two agree exactly."""
    k = as_kernel(k)
    zr = k.inner_neighbour(z)
    lhs = poisson_kernel(k, v, z)
    if green is None:
        g = green_columns(k, [v])[k.index(zr), 0]
    else:
        g = green(zr, v)
    return lhs, g / 4.0


def lazy_green_1d(a: int, b: int, y: int) -> float:
    """Diagonal Green's value of the lazy walk on ``(a, b)``: ``4(b-y)(y-a)/(b-a)``."""
    if not a < y < b:
        raise ValueError(f"y={y} must lie strictly between a={a} and b={b}")
    return 4.0 * (b - y) * (y - a) / (b - a)


# --------------------------------------------------------------------------
# continuum kernel on [0, 2U] x [0, 1]

def continuum_kernel(Upsilon: float, w, z, terms: int = 200, return_tail: bool = False):
    """Continuum exit density on ``[0, 2 Upsilon] x [0, 1]`` from ``w`` at ``z``."""
    U2 = 2.0 * Upsilon
    wx, wy = float(w[0]), float(w[1])
    if not (0 < wx < U2 and 0 < wy < 1):
        raise ValueError("w must be strictly inside the rectangle")
    zx, zy = float(z[0]), float(z[1])
    j = np.arange(1, terms + 1, dtype=float)
    if zx in (0.0, U2) and 0 <= zy <= 1:
        dx = wx if zx == 0.0 else U2 - wx
        ratio = _sinh_ratio(j * math.pi, U2 - dx, U2)
        val = 2.0 * np.sum(ratio * np.sin(j * math.pi * wy) * np.sin(j * math.pi * zy))
        decay, scale, period = dx * math.pi, 2.0, 2.0 * math.pi * U2
    elif zy in (0.0, 1.0) and 0 <= zx <= U2:
        dy = wy if zy == 0.0 else 1.0 - wy
        ratio = _sinh_ratio(j * math.pi / U2, 1.0 - dy, 1.0)
        val = (1.0 / Upsilon) * np.sum(
            ratio * np.sin(j * math.pi * wx / U2) * np.sin(j * math.pi * zx / U2))
        decay, scale, period = dy * math.pi / U2, 1.0 / Upsilon, 2.0 * math.pi / U2
    else:
        raise ValueError("z must lie on the boundary")
    if not return_tail:
        return float(val)
    # term j is at most scale * exp(-decay j) / (1 - exp(-period j))
    q = math.exp(-decay)
    tail = scale * q ** (terms + 1) / ((1 - q) * -math.expm1(-period))
    return float(val), tail


def _boundary_nodes(Upsilon: float, n: int):
    """Gauss-Legendre nodes on the four sides: points, weights."""
    g, gw = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (g + 1)
    U2 = 2 * Upsilon
    pts = [np.stack([np.zeros(n), s], 1), np.stack([np.full(n, U2), s], 1),
           np.stack([U2 * s, np.zeros(n)], 1), np.stack([U2 * s, np.ones(n)], 1)]
    wts = [0.5 * gw, 0.5 * gw, U2 * 0.5 * gw, U2 * 0.5 * gw]
    return np.concatenate(pts), np.concatenate(wts)


def _kernel_vector(Upsilon, w, pts, terms):
    return np.array([continuum_kernel(Upsilon, w, z, terms) for z in pts])


def boundary_log_integral(Upsilon: float, y: float, nodes: int = 96, terms: int = 400) -> float:
    """``int log|z - (U, y)| h((U, y), z) dz`` over the boundary."""
    pts, wts = _boundary_nodes(Upsilon, nodes)
    w = (Upsilon, y)
    h = _kernel_vector(Upsilon, w, pts, terms)
    logs = np.log(np.hypot(pts[:, 0] - w[0], pts[:, 1] - w[1]))
    return float(np.sum(wts * h * logs))


def c_constant(Upsilon: float, I_set, nodes: int = 96, outer: int = 24, tol: float = 1e-7) -> float:
    """Quadrature value of the constant term in the averaged diagonal Green's function."""
    total, length = 0.0, 0.0
    for lo, hi in I_set:
        vals = []
        for n_out in (outer, 2 * outer):
            g, gw = np.polynomial.legendre.leggauss(n_out)
            ys = lo + (hi - lo) * 0.5 * (g + 1)
            vals.append(sum(wt * boundary_log_integral(Upsilon, y, nodes) for y, wt in zip(ys, gw))
                        * 0.5 * (hi - lo))
        if abs(vals[0] - vals[1]) > tol:
            raise QuadratureError(f"outer quadrature not converged on [{lo}, {hi}]")
        total += vals[1]
        length += hi - lo
    return 2.0 / math.pi * total / length + POTENTIAL_CONST


@dataclass(frozen=True)
class AvgGreenFit:
    sizes: tuple
    means: tuple
    slope: float
    intercept: float
    C_quad: float


def avg_green_asymptotic(Upsilon: float, I_set, N_list, quadrature: bool = True) -> AvgGreenFit:
    """Average of ``G(v, v)`` over the vertical segment ``{U N} x N I`` and its log-N fit."""
    I_set = [tuple(map(float, iv)) for iv in I_set]
    for lo, hi in I_set:
        if not 0 < lo < hi < 1:
            raise ValueError("intervals must sit strictly inside (0, 1)")
    means = []
    for N in N_list:
        xc = round(Upsilon * N)
        M = 2 * xc
        k = RectKernel(M, N)
        ys = sorted({y for lo, hi in I_set for y in range(math.ceil(lo * N), math.floor(hi * N) + 1)})
        means.append(np.mean([green_spectral(k, (xc, y), (xc, y)) for y in ys]))
    A = np.stack([np.log(N_list), np.ones(len(N_list))], 1)
    (slope, c0), *_ = np.linalg.lstsq(A, np.array(means), rcond=None)
    C = c_constant(Upsilon, I_set) if quadrature else float("nan")
    return AvgGreenFit(tuple(N_list), tuple(means), float(slope), float(c0), C)
