"""Penalised total variation of Brownian paths with step-function penalties."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ResolutionError, ResourceError
from .rng import stream

DP_LIMIT = 1_000_000


@dataclass(frozen=True)
class PathSample:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if t.shape != v.shape or t.ndim != 1 or t.size < 2:
            raise ValueError("times and values must be equal-length 1-d arrays")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def T(self) -> float:
        return float(self.times[-1])


def brownian_path(n: int, T: float = 1.0, rng: np.random.Generator | None = None) -> PathSample:
    rng = rng or np.random.default_rng()
    t = np.linspace(0.0, T, n + 1)
    inc = rng.standard_normal(n) * math.sqrt(T / n)
    return PathSample(t, np.concatenate([[0.0], np.cumsum(inc)]))


@dataclass(frozen=True)
class StepPenalty:
    breakpoints: tuple
    levels: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.breakpoints)
        lv = tuple(float(x) for x in self.levels)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "levels", lv)
        if len(b) != len(lv) + 1 or len(lv) < 1:
            raise ValueError("need one more breakpoint than levels")
        if any(y <= x for x, y in zip(b, b[1:])) or b[0] != 0.0:
            raise ValueError("breakpoints must start at 0 and increase")
        if any(v <= 0 for v in lv):
            raise ValueError("penalty levels must be positive")

    @classmethod
    def constant(cls, lam: float, T: float = 1.0) -> "StepPenalty":
        return cls((0.0, T), (lam,))

    @property
    def T(self) -> float:
        return self.breakpoints[-1]

    def __call__(self, t):
        """Level at ``t``; pieces are closed on the left, the last one on both sides."""
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.levels) - 1)
        return np.asarray(self.levels)[idx]

    def integral_inverse(self) -> float:
        b = np.diff(self.breakpoints)
        return float(np.sum(b / np.asarray(self.levels)))


@dataclass(frozen=True)
class TimePartition:
    points: tuple

    def __post_init__(self):
        p = tuple(float(x) for x in self.points)
        object.__setattr__(self, "points", p)
        if len(p) < 2 or any(y <= x for x, y in zip(p, p[1:])):
            raise ValueError("partition points must increase and include both ends")

    @property
    def k(self) -> int:
        return len(self.points) - 2


@dataclass
class RenewalRecord:
    taus: list = field(default_factory=list)
    xis: list = field(default_factory=list)
    xi_values: list = field(default_factory=list)

    @property
    def deltas(self) -> list:
        v = self.xi_values
        return [(-1) ** j * (v[j + 1] - v[j]) for j in range(len(v) - 1)]


def _penalty_fn(penalty):
    if isinstance(penalty, StepPenalty):
        return penalty
    lam = float(penalty)
    return lambda t: np.full(np.shape(t), lam) if np.ndim(t) else lam


# --------------------------------------------------------------------------
# evaluation and the grid oracle

def phi_value(path: PathSample, part: TimePartition, penalty) -> float:
    """Sum of absolute increments over the partition minus the internal penalties."""
    pts = np.asarray(part.points)
    if pts[0] < path.times[0] - 1e-12 or pts[-1] > path.times[-1] + 1e-12:
        raise ValueError("partition extends beyond the path's time range")
    f = np.interp(pts, path.times, path.values)
    lam = _penalty_fn(penalty)
    return float(np.abs(np.diff(f)).sum() - np.sum(lam(pts[1:-1])))


def phi_optimal_dp(path: PathSample, penalty, limit: int = DP_LIMIT):
    """Best partition with internal points on the grid.

    ``V_j = max_i (V_i + |f_j - f_i|) - pen_j`` splits into two running maxima,
    one for each sign of ``f_j - f_i``, which makes the recursion linear in the
    grid size.  Ties keep the earliest index.
    """
    f = path.values
    n = f.size
    if n > limit:
        raise ResourceError(f"grid of {n} points exceeds the DP limit {limit}")
    pen = np.asarray(_penalty_fn(penalty)(path.times), dtype=float)
    best_lo, arg_lo = -f[0], 0      # max V_i - f_i
    best_hi, arg_hi = f[0], 0       # max V_i + f_i
    V = np.zeros(n)
    pred = np.zeros(n, dtype=int)
    for j in range(1, n):
        up = f[j] + best_lo
        down = -f[j] + best_hi
        if up >= down:
            V[j], pred[j] = up, arg_lo
        else:
            V[j], pred[j] = down, arg_hi
        if j < n - 1:
            V[j] -= pen[j]
            if V[j] - f[j] > best_lo:
                best_lo, arg_lo = V[j] - f[j], j
            if V[j] + f[j] > best_hi:
                best_hi, arg_hi = V[j] + f[j], j
    idx = [n - 1]
    while idx[-1] != 0:
        idx.append(pred[idx[-1]])
    return float(V[-1]), TimePartition(tuple(path.times[i] for i in reversed(idx)))


class StreamingOracle:
    """The same recursion advanced one grid step at a time for a batch of paths."""

    def __init__(self, f0: np.ndarray):
        f0 = np.asarray(f0, dtype=float)
        self.best_lo = -f0.copy()
        self.best_hi = f0.copy()

    def step(self, f: np.ndarray, pen, final: bool = False) -> np.ndarray:
        V = np.maximum(f + self.best_lo, -f + self.best_hi)
        if not final:
            V = V - pen
            np.maximum(self.best_lo, V - f, out=self.best_lo)
            np.maximum(self.best_hi, V + f, out=self.best_hi)
        return V


# --------------------------------------------------------------------------
# lambda* and the time change

def lambda_star(penalty: StepPenalty) -> float:
    b = np.diff(penalty.breakpoints)
    lv = np.asarray(penalty.levels)
    return float(np.sum(b / lv ** 2) ** -0.5)


@dataclass(frozen=True)
class TimeChange:
    penalty: StepPenalty
    lam_star: float
    knots: np.ndarray      # breakpoints s_j
    images: np.ndarray     # F(s_j), ending at exactly 1

    def F(self, t):
        return np.interp(t, self.knots, self.images)

    def F_inv(self, u):
        return np.interp(u, self.images, self.knots)

    @property
    def lambda_tilde(self) -> StepPenalty:
        return StepPenalty(tuple(self.images), self.penalty.levels)


def time_change(penalty: StepPenalty) -> TimeChange:
    ls = lambda_star(penalty)
    b = np.asarray(penalty.breakpoints)
    slopes = (ls / np.asarray(penalty.levels)) ** 2
    images = np.concatenate([[0.0], np.cumsum(slopes * np.diff(b))])
    images[-1] = 1.0
    return TimeChange(penalty, ls, b, images)


def phi_tilde_value(times, W, part: TimePartition, lam_tilde: StepPenalty, lam_star: float) -> float:
    """Penalised variation of the gain integral of ``lam_tilde / lam_star`` against ``W``."""
    times = np.asarray(times, dtype=float)
    inc = np.diff(np.asarray(W, dtype=float)) * lam_tilde(times[:-1]) / lam_star
    gain = np.concatenate([[0.0], np.cumsum(inc)])
    g = np.interp(part.points, times, gain)
    return float(np.abs(np.diff(g)).sum() - np.sum(lam_tilde(np.asarray(part.points[1:-1]))))


# --------------------------------------------------------------------------
# uptick / downtick detection

class TickTracker:
    """Alternating tick detection for a batch of paths observed on a common grid.

    ``phase`` is +1 while waiting for an uptick (tracking the running minimum)
    and -1 while waiting for a downtick (tracking the running maximum).
    """

    def __init__(self, lam_star: float, w0: np.ndarray, phase0: np.ndarray):
        self.lam = lam_star
        self.phase = np.asarray(phase0, dtype=float).copy()
        self.ext = np.asarray(w0, dtype=float).copy()
        self.ext_idx = np.zeros(self.ext.shape, dtype=np.int64)

    def step(self, j: int, w: np.ndarray):
        """Advance to grid index ``j``; return ``(hit_mask, xi_index, xi_value)`` for hits."""
        d = self.phase * (w - self.ext)
        better = d < 0
        self.ext = np.where(better, w, self.ext)
        self.ext_idx = np.where(better, j, self.ext_idx)
        hit = d >= self.lam
        xi_idx = self.ext_idx.copy()
        xi_val = self.ext.copy()
        if hit.any():
            self.phase = np.where(hit, -self.phase, self.phase)
            self.ext = np.where(hit, w, self.ext)
            self.ext_idx = np.where(hit, j, self.ext_idx)
        return hit, xi_idx, xi_val


def check_resolution(path: PathSample, lam_star: float) -> None:
    dt = np.diff(path.times).max()
    if math.sqrt(dt) > lam_star / 20.0 * (1 + 1e-9):
        raise ResolutionError(
            f"grid step {dt:.3g} too coarse for lambda*={lam_star}; need sqrt(dt) <= lambda*/20")


def uptick_partition(path: PathSample, lam_star: float, cap_k: int | None = None,
                     start: str = "up", burn_in: float = 0.0):
    """Partition from the extremum times of alternating ticks.

    ``start="down"`` looks for a downtick first.  Extremum times earlier than
    ``burn_in`` are recorded but not used; at most ``cap_k`` internal points
    (default ``ceil(2 / lam_star**2)``) are kept.
    """
    check_resolution(path, lam_star)
    if cap_k is None:
        cap_k = math.ceil(2.0 / lam_star ** 2)
    if start not in ("up", "down"):
        raise ValueError("start must be 'up' or 'down'")
    t = path.times
    w = path.values.tolist()
    phase = 1.0 if start == "up" else -1.0
    ext, ext_i = w[0], 0
    rec = RenewalRecord()
    for j in range(1, len(w)):
        d = phase * (w[j] - ext)
        if d < 0:
            ext, ext_i = w[j], j
        elif d >= lam_star:
            rec.taus.append(float(t[j]))
            rec.xis.append(float(t[ext_i]))
            rec.xi_values.append(ext)
            phase = -phase
            ext, ext_i = w[j], j
    inner = [x for x in rec.xis if burn_in <= x and 0.0 < x < path.T][:cap_k]
    inner = sorted(set(inner))
    return TimePartition((0.0, *inner, path.T)), rec


# --------------------------------------------------------------------------
# renewal statistics with bridge-corrected extrema

def _bridge_extrema(rng, a, b, dt):
    """Max and min of a Brownian bridge from ``a`` to ``b`` over time ``dt`` (independent draws)."""
    gap = (b - a) ** 2
    u1 = rng.random(a.shape)
    u2 = rng.random(a.shape)
    mx = 0.5 * (a + b + np.sqrt(gap - 2.0 * dt * np.log(u1)))
    mn = 0.5 * (a + b - np.sqrt(gap - 2.0 * dt * np.log(u2)))
    return mx, mn


def simulate_ticks(lam_star: float, n_paths: int, n_ticks: int, seed: int,
                   steps_per_tick: int = 400, max_steps: int = 10 ** 6):
    """Continuous-time tick times via per-step bridge extrema.

    Each step samples the path's maximum and minimum inside the step, so
    excursions between grid points are not missed.  Returns arrays of shape
    ``(n_paths, n_ticks)`` holding ``tau`` and the extremum values at ``xi``.
    """
    dt = lam_star ** 2 / steps_per_tick
    rng = stream(seed, 0x71C)
    w = np.zeros(n_paths)
    phase = np.ones(n_paths)
    ext = np.zeros(n_paths)
    taus = np.full((n_paths, n_ticks), np.nan)
    xv = np.full((n_paths, n_ticks), np.nan)
    count = np.zeros(n_paths, dtype=int)
    active = np.arange(n_paths)
    step = 0
    while active.size and step < max_steps:
        step += 1
        a = w[active]
        b = a + rng.standard_normal(active.size) * math.sqrt(dt)
        mx, mn = _bridge_extrema(rng, a, b, dt)
        ph = phase[active]
        far = np.where(ph > 0, mx, mn)        # extreme in the tick direction
        near = np.where(ph > 0, mn, mx)       # extreme against it
        e = ext[active]
        hit = ph * (far - e) >= lam_star
        hi = active[hit]
        c = count[hi]
        taus[hi, c] = (step - 0.5) * dt
        xv[hi, c] = e[hit]
        count[hi] += 1
        # running extremum: after a hit it restarts at the step's far value
        new_e = np.where(ph * (near - e) < 0, near, e)
        new_e = np.where(hit, far, new_e)
        ext[active] = new_e
        phase[hi] = -phase[hi]
        w[active] = b
        active = active[count[active] < n_ticks]
    if active.size:
        raise ResourceError("tick simulation did not finish within max_steps")
    return taus, xv


@dataclass(frozen=True)
class RenewalStats:
    lam_star: float
    mean_tau1: float
    se_tau1: float
    mean_delta: float
    se_delta: float
    theta: float
    mgf: float
    se_mgf: float
    mgf_exact: float


def renewal_stats(lam_star: float, n_paths: int, seed: int, n_ticks: int = 4) -> RenewalStats:
    """Empirical ``E tau_1``, ``E Delta_j`` and the moment generating function of ``tau_1``."""
    taus, xv = simulate_ticks(lam_star, n_paths, n_ticks, seed)
    tau1 = taus[:, 0]
    # Delta_1 = W(xi_2) - W(xi_1): one value per path keeps the samples independent
    delta = xv[:, 1] - xv[:, 0]
    theta = math.pi ** 2 / (64.0 * lam_star ** 2)
    mg = np.exp(theta * tau1)
    n = n_paths
    return RenewalStats(lam_star, float(tau1.mean()), float(tau1.std(ddof=1) / math.sqrt(n)),
                        float(delta.mean()), float(delta.std(ddof=1) / math.sqrt(n)),
                        theta, float(mg.mean()), float(mg.std(ddof=1) / math.sqrt(n)),
                        1.0 / math.cos(math.sqrt(2.0 * theta) * lam_star))


def grid_tick_stats(lam_star: float, n_paths: int, seed: int, sigma_ratio: float = 20.0,
                    n_ticks: int = 2):
    """Tick statistics from plain grid detection (step sd ``lam_star / sigma_ratio``)."""
    dt = (lam_star / sigma_ratio) ** 2
    rng = stream(seed, 0x6D1)
    w = np.zeros(n_paths)
    tr = TickTracker(lam_star, w, np.ones(n_paths))
    taus = np.full((n_paths, n_ticks), np.nan)
    xv = np.full((n_paths, n_ticks), np.nan)
    count = np.zeros(n_paths, dtype=int)
    j = 0
    while (count < n_ticks).any():
        j += 1
        w = w + rng.standard_normal(n_paths) * math.sqrt(dt)
        hit, _, val = tr.step(j, w)
        hit &= count < n_ticks
        idx = np.flatnonzero(hit)
        taus[idx, count[idx]] = j * dt
        xv[idx, count[idx]] = val[idx]
        count[idx] += 1
    return float(taus[:, 0].mean()), float((xv[:, 1] - xv[:, 0]).mean())


# --------------------------------------------------------------------------
# the strategy experiment

def experiment_grid(tc: TimeChange, n_min: int) -> np.ndarray:
    """Uniform grid on the new clock with the images of the breakpoints added."""
    u = np.union1d(np.linspace(0.0, 1.0, n_min + 1), tc.images)
    return u


def run_paths(penalty: StepPenalty, n_paths: int, seed: int, n_grid: int | None = None,
              burn_in: float | None = None, cap_k: int | None = None, start: str = "up",
              chunk: int = 20000):
    """Strategy and oracle values path by path.

    Paths are generated on the new clock ``u``: ``W`` is a standard Brownian
    motion and ``Y = B(F^{-1}(u))`` has increments ``(lam_tilde/lam*) dW``.
    The strategy partition is read from ticks of ``W`` and evaluated on ``Y``
    with the original penalty; the oracle maximises over the same grid, so the
    strategy never beats it.  Returns ``(phi_strategy, phi_oracle, k)``.
    """
    tc = time_change(penalty)
    ls = tc.lam_star
    if n_grid is None:
        n_grid = math.ceil((20.0 / ls) ** 2)
    if burn_in is None:
        burn_in = 13.0 * ls ** 2 * math.log(1.0 / ls)
    if cap_k is None:
        cap_k = math.ceil(2.0 / ls ** 2)
    u = experiment_grid(tc, n_grid)
    if math.sqrt(np.diff(u).max()) > ls / 20.0 * (1 + 1e-9):
        raise ResolutionError("experiment grid too coarse for lambda*")
    du = np.diff(u)
    lt = tc.lambda_tilde
    ratio = lt(u[:-1]) / ls                # dY / dW on each cell
    pen = lt(u)                            # penalty at grid points
    out_s, out_o, out_k = [], [], []
    for c0 in range(0, n_paths, chunk):
        P = min(chunk, n_paths - c0)
        rng = stream(seed, 0x57A7, c0)
        w = np.zeros(P)
        y = np.zeros(P)
        oracle = StreamingOracle(y)
        phase0 = np.ones(P) if start == "up" else -np.ones(P)
        tr = TickTracker(ls, w, phase0)
        ext_y = np.zeros(P)                # Y at the running extremum of W
        last_y = np.zeros(P)               # Y at the last partition point used
        phi = np.zeros(P)
        k = np.zeros(P, dtype=int)
        n = len(u) - 1
        for j in range(1, n + 1):
            dw = rng.standard_normal(P) * math.sqrt(du[j - 1])
            w += dw
            y += ratio[j - 1] * dw
            final = j == n
            V = oracle.step(y, pen[j], final=final)
            d = tr.phase * (w - tr.ext)
            better = d < 0
            ext_y = np.where(better, y, ext_y)
            hit, xi_idx, _ = tr.step(j, w)
            if hit.any():
                xi_t = u[xi_idx]
                use = hit & (xi_t >= burn_in) & (xi_t > 0) & (k < cap_k)
                if use.any():
                    phi = np.where(use, phi + np.abs(ext_y - last_y) - pen[xi_idx], phi)
                    last_y = np.where(use, ext_y, last_y)
                    k += use
                ext_y = np.where(hit, y, ext_y)
        phi += np.abs(y - last_y)
        out_s.append(phi)
        out_o.append(V)
        out_k.append(k)
    return np.concatenate(out_s), np.concatenate(out_o), np.concatenate(out_k)


def strategy_experiment(penalty: StepPenalty, n_paths: int, seed: int, **kw) -> dict:
    """Monte Carlo report for the tick strategy against the grid oracle."""
    if penalty.T != 1.0:
        raise ValueError("the experiment runs on [0, 1]")
    ls = lambda_star(penalty)
    if ls > 0.5:
        raise ValueError("the strategy experiment needs lambda* <= 0.5")
    s, o, k = run_paths(penalty, n_paths, seed, **kw)
    rt = math.sqrt(n_paths)
    rep = {
        "penalty": {"breaks": list(penalty.breakpoints), "levels": list(penalty.levels)},
        "lambda_star": ls,
        "n_paths": n_paths,
        "seed": seed,
        "mean_phi_strategy": float(s.mean()),
        "mean_phi_oracle": float(o.mean()),
        "integral_inv_lambda": penalty.integral_inverse(),
        "se_strategy": float(s.std(ddof=1) / rt) if n_paths > 1 else 0.0,
        "se_oracle": float(o.std(ddof=1) / rt) if n_paths > 1 else 0.0,
        "max_k": int(k.max()),
        "cap_k": math.ceil(2.0 / ls ** 2),
        "min_gap_oracle_minus_strategy": float((o - s).min()),
    }
    if len(penalty.levels) == 1:
        lam = penalty.levels[0]
        rep["sandwich_lower"] = lam
        rep["sandwich_upper"] = 1.0 / lam + lam
    return rep


def oracle_means(lam: float, n_paths: int, seed: int, n_grid: int | None = None):
    """Mean and standard error of the grid oracle for a constant penalty on [0, 1]."""
    _, o, _ = run_paths(StepPenalty.constant(lam), n_paths, seed, n_grid=n_grid)
    return float(o.mean()), float(o.std(ddof=1) / math.sqrt(n_paths))
