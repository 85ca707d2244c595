"""Monte Carlo hitting probabilities for the weighted diffusion on the half space.

The process has generator ``Delta_x + d_tt + (a'(t)/a(t)) d_t``, i.e. it is
generated by ``(1/a) div(a grad)``. For ``a = t^alpha`` the height is a Bessel
process of dimension ``delta = 1 + alpha`` run at double speed, so the height
is advanced exactly in law through a noncentral chi-square draw for ``t^2``,
and absorption at ``t = 0`` inside a step is sampled from the exact bridge
survival probability. Crossings of the lateral and top boundaries inside a
step use the Brownian-bridge correction against the local tangent plane.

Cylinders ``Omega_k = B(x0, 2^k R) x (0, 2^k R)`` are centred on the start
point; ``Gamma_1`` is the base ``t = 0`` and ``Gamma_2`` the rest of the
boundary.
"""
from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse, special
from scipy.interpolate import RectBivariateSpline
from scipy.sparse import linalg as splinalg
from scipy.stats import norm

from .bernstein import WeightProfile

__all__ = [
    "DiffusionConfig",
    "HittingStats",
    "Region",
    "InsufficientPathsError",
    "StepBudgetExceeded",
    "ExtrapolationError",
    "HIT_BASE",
    "HIT_SIDE",
    "BUDGET",
    "wilson_interval",
    "simulate_path",
    "simulate_levels",
    "escape_probability_curve",
    "geometric_decay_fit",
    "harmonic_measure_oracle",
    "mean_value_check",
]

HIT_BASE = "hit_base"
HIT_SIDE = "hit_side"
BUDGET = "step_budget_exceeded"

_Z95 = float(norm.ppf(0.975))
BLOCK = 2000


class InsufficientPathsError(RuntimeError):
    """Too few paths (or hits) to form the requested confidence statements."""


class StepBudgetExceeded(RuntimeError):
    """A path used more steps than the configured budget."""


class ExtrapolationError(ValueError):
    """Exit points fall outside the sampled field."""


@dataclass
class DiffusionConfig:
    """Monte Carlo set-up.

    ``dt`` is the smallest step; away from the boundaries steps grow as
    ``(step_scale * distance)^2``. ``x0`` fixes the base dimension.
    """

    weight: WeightProfile = field(default_factory=lambda: WeightProfile.power(0.0))
    dt: float | None = None
    paths: int = 20000
    seed: int = 0
    R: float = 1.0
    k_max: int = 5
    x0: tuple = (0.0,)
    t0: float = 0.5
    step_scale: float = 0.2
    step_budget: int = 10**7
    jobs: int = 1

    def __post_init__(self):
        if self.dt is None:
            self.dt = self.R**2 * 1e-5
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.paths < 1:
            raise ValueError("need at least one path")
        if not self.t0 > 0:
            raise ValueError("start height must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.x0 = tuple(float(v) for v in np.atleast_1d(self.x0))

    @property
    def dim(self) -> int:
        return len(self.x0)

    def level_size(self, k: int) -> float:
        return 2.0**k * self.R

    def first_level(self) -> int:
        """Smallest ``k`` whose cylinder contains the start point."""
        k = 0
        while self.t0 >= self.level_size(k):
            k += 1
        return k


def wilson_interval(hits: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    p = hits / trials
    den = 1 + z * z / trials
    mid = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


@dataclass
class HittingStats:
    """Per-level tallies of ``Gamma_2`` hits before ``Gamma_1``."""

    levels: list[int]
    trials: list[int]
    hits: list[int]
    budget_exceeded: int = 0

    def __post_init__(self):
        for h, n in zip(self.hits, self.trials):
            if not 0 <= h <= n:
                raise ValueError("hits must lie in [0, trials]")

    @property
    def p_hat(self) -> list[float]:
        return [h / n if n else float("nan") for h, n in zip(self.hits, self.trials)]

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return [wilson_interval(h, n) for h, n in zip(self.hits, self.trials)]

    def rows(self) -> list[tuple]:
        """``(k, trials, hits, p_hat, ci_lo, ci_hi)`` per level."""
        return [(k, n, h, p, lo, hi) for k, n, h, p, (lo, hi)
                in zip(self.levels, self.trials, self.hits, self.p_hat, self.intervals)]

    def to_csv(self) -> str:
        lines = ["k,trials,hits,p_hat,ci_lo,ci_hi"]
        for k, n, h, p, lo, hi in self.rows():
            lines.append(f"{k},{n},{h},{p:.17g},{lo:.17g},{hi:.17g}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# stepping


def _vertical_step(T, dt, weight: WeightProfile, rng):
    """Advance heights by ``dt``; returns new heights and a base-hit mask."""
    alpha = weight.alpha_hint
    v = 2.0 * dt
    if alpha is not None:
        if not -1 < alpha < 1:
            raise ValueError("power weights need |alpha| < 1 for the base to be reachable")
        delta = 1.0 + alpha
        Z = T * T
        Z1 = v * rng.noncentral_chisquare(delta, Z / v)
        T1 = np.sqrt(Z1)
        nu = 0.5 * delta - 1.0
        x = np.sqrt(Z * Z1) / v
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            survive = special.ive(-nu, x) / special.ive(nu, x)
        survive = np.where(x > 0, np.nan_to_num(survive, nan=1.0), 0.0)
        hit = rng.random(T.shape) >= survive
        return T1, hit
    drift = weight.log_derivative(T)
    T1 = T + drift * dt + np.sqrt(v) * rng.standard_normal(T.shape)
    cross = np.exp(-np.clip(T * T1, 0.0, None) / dt)
    hit = (T1 <= 0) | (rng.random(T.shape) < cross)
    return np.abs(T1), hit


def _plane_cross(d0, d1, dt, rng):
    """Did a Brownian bridge with variance ``2 dt`` cross a plane at distances ``d0 -> d1``?"""
    with np.errstate(over="ignore"):
        p = np.exp(-np.clip(d0 * d1, 0.0, None) / dt)
    return (d1 <= 0) | (rng.random(d0.shape) < p)


@dataclass
class Region:
    """Cylinder ``B(center, radius) x (floor, height)`` for exit-point sampling."""

    center: tuple
    radius: float
    height: float
    floor: float = 0.0

    def contains(self, x, t) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.linalg.norm(x - np.asarray(self.center)) < self.radius and self.floor < t < self.height)


def _block_levels(cfg: DiffusionConfig, levels: list[int], start: int, count: int, block: int):
    """Simulate ``count`` paths from one RNG block; returns (side_hits, budget_flags)."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, block]))
    n = cfg.dim
    center = np.asarray(cfg.x0)
    X = np.tile(center, (count, 1))
    T = np.full(count, cfg.t0)
    kmin, kmax = levels[0], levels[-1]
    level = np.full(count, kmin)
    side = np.zeros((count, len(levels)), dtype=bool)
    steps = np.zeros(count, dtype=np.int64)
    active = np.ones(count, dtype=bool)
    budget = np.zeros(count, dtype=bool)
    while active.any():
        idx = np.flatnonzero(active)
        size = cfg.R * 2.0 ** level[idx]
        x, t = X[idx], T[idx]
        lat0 = size - np.linalg.norm(x - center, axis=1)
        top0 = size - t
        d = np.minimum(lat0, top0)
        dt = np.maximum(cfg.dt, (cfg.step_scale * d) ** 2)
        x1 = x + np.sqrt(2 * dt)[:, None] * rng.standard_normal((idx.size, n))
        t1, base = _vertical_step(t, dt, cfg.weight, rng)
        steps[idx] += 1
        lat1 = size - np.linalg.norm(x1 - center, axis=1)
        top1 = size - t1
        out = _plane_cross(lat0, lat1, dt, rng) | _plane_cross(top0, top1, dt, rng)
        # a step that leaves through Gamma_2 is credited there even if the height
        # bridge also touched the base; both events need a step of size ~ d
        base &= ~out
        X[idx], T[idx] = x1, t1
        lev = level[idx]
        while out.any():
            j = np.flatnonzero(out)
            side[idx[j], lev[j] - kmin] = True
            lev[j] += 1
            done = lev[j] > kmax
            still = ~done
            sz = cfg.R * 2.0 ** lev[j[still]]
            inside = (np.linalg.norm(x1[j[still]] - center, axis=1) < sz) & (t1[j[still]] < sz)
            out = np.zeros_like(out)
            out[j[still][~inside]] = True
        level[idx] = lev
        finished = base | (lev > kmax)
        over = steps[idx] >= cfg.step_budget
        budget[idx[over & ~finished]] = True
        active[idx[finished | over]] = False
    # nesting: Gamma_2 at level k+1 implies Gamma_2 at level k
    assert np.all(side[:, 1:] <= side[:, :-1]), "event nesting violated"
    return side, budget


def simulate_levels(cfg: DiffusionConfig, levels=None):
    """Side-hit flags per path and level, plus per-path budget flags."""
    levels = list(range(max(1, cfg.first_level()), cfg.k_max + 1)) if levels is None else list(levels)
    if not levels or levels[0] < cfg.first_level():
        raise ValueError("start point must lie inside every requested cylinder")
    levels = list(range(levels[0], levels[-1] + 1))
    jobs = []
    for b, start in enumerate(range(0, cfg.paths, BLOCK)):
        jobs.append((cfg, levels, start, min(BLOCK, cfg.paths - start), b))
    if cfg.jobs > 1 and len(jobs) > 1 and "fork" in multiprocessing.get_all_start_methods():
        # weights hold closures, so workers inherit the jobs by fork instead of pickling them
        global _FORK_JOBS
        _FORK_JOBS = jobs
        try:
            with ProcessPoolExecutor(cfg.jobs, mp_context=multiprocessing.get_context("fork")) as ex:
                parts = list(ex.map(_run_forked_block, range(len(jobs))))
        finally:
            _FORK_JOBS = None
    else:
        parts = [_run_block(j) for j in jobs]
    side = np.concatenate([p[0] for p in parts])
    budget = np.concatenate([p[1] for p in parts])
    return levels, side, budget


def _run_block(args):
    return _block_levels(*args)


_FORK_JOBS = None


def _run_forked_block(i):
    return _run_block(_FORK_JOBS[i])


def simulate_path(cfg: DiffusionConfig, k: int, index: int = 0) -> str:
    """Outcome of one path in ``Omega_k``: ``hit_base``, ``hit_side`` or budget exhaustion.

    ``index`` selects the RNG block, so distinct indices give independent paths.
    """
    if cfg.first_level() > k:
        raise ValueError("start point is outside Omega_k")
    side, budget = _block_levels(cfg, [k], 0, 1, index)
    if budget[0]:
        return BUDGET
    return HIT_SIDE if side[0, 0] else HIT_BASE


def escape_probability_curve(cfg: DiffusionConfig, min_paths: int = 100) -> HittingStats:
    """Estimate ``p_k = P(T_Gamma2,k < T_Gamma1,k)`` for ``k = 1 .. k_max``.

    Raises
    ------
    InsufficientPathsError
        With fewer than ``min_paths`` paths, or when some level records no
        hit so the decay cannot be resolved.
    """
    if cfg.paths < min_paths:
        raise InsufficientPathsError(f"{cfg.paths} paths; confidence intervals need at least {min_paths}")
    levels, side, budget = simulate_levels(cfg)
    ok = ~budget
    trials = int(ok.sum())
    hits = [int(side[ok, i].sum()) for i in range(len(levels))]
    stats = HittingStats(levels, [trials] * len(levels), hits, int(budget.sum()))
    if min(hits) == 0:
        raise InsufficientPathsError("a level has no escapes; increase paths to resolve the decay")
    return stats


def geometric_decay_fit(stats: HittingStats) -> dict:
    """Weighted least squares of ``log p_k`` against ``k``.

    Weights are the delta-method inverse variances ``n p / (1 - p)``. The
    decay is confirmed when ``slope + 1.96 SE < 0``; monotonicity is judged
    by overlap of consecutive Wilson intervals.
    """
    k = np.asarray(stats.levels, dtype=float)
    p = np.asarray(stats.p_hat)
    n = np.asarray(stats.trials, dtype=float)
    if np.any(p <= 0) or np.any(p >= 1):
        raise InsufficientPathsError("log-fit needs 0 < p_k < 1 at every level")
    y = np.log(p)
    w = n * p / (1 - p)
    X = np.stack([np.ones_like(k), k], axis=1)
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    coef = cov @ (WX.T @ y)
    se = math.sqrt(cov[1, 1])
    ci = stats.intervals
    nonincreasing = all(ci[i + 1][0] <= ci[i][1] for i in range(len(ci) - 1))
    return {"slope": float(coef[1]), "se": float(se), "upper": float(coef[1] + _Z95 * se),
            "negative": bool(coef[1] + _Z95 * se < 0), "nonincreasing": nonincreasing}


# --------------------------------------------------------------------------
# oracle


def _cylinder_solve(weight: WeightProfile, dim: int, radius: float, height: float, cells: int):
    """Finite differences for ``P(Gamma_2 before Gamma_1)`` on ``[0, radius] x [0, height]``.

    Radial second differences with the ``(dim-1)/r`` term and evenness at the
    axis; flux-form vertical differences with exact cell integrals of the
    weight. ``h = 0`` on the base, ``1`` on the side and top.
    """
    nr = cells
    nt = cells
    hr = radius / nr
    r = hr * np.arange(nr + 1)
    t = height * np.arange(nt + 1) / nt
    half = 0.5 * (t[1:] + t[:-1])
    W = weight.cell_integrals(np.concatenate(([t[0]], half, [t[-1]])), 1.0)[1:nt]
    B = weight.cell_integrals(t, -1.0)
    k = dim - 1
    # radial operator on nodes 0..nr-1, column nr is the boundary value
    main = np.full(nr, -2.0 / hr**2)
    up = np.empty(nr)
    lo = np.empty(nr)
    up[0] = 2.0 * (k + 1) / hr**2
    main[0] = -2.0 * (k + 1) / hr**2
    lo[0] = 0.0
    i = np.arange(1, nr)
    up[1:] = 1.0 / hr**2 + k / (2 * hr * r[i])
    lo[1:] = 1.0 / hr**2 - k / (2 * hr * r[i])
    Lr = sparse.diags([lo[1:], main, up], [-1, 0, 1], shape=(nr, nr + 1)).tocsr()
    Tv = sparse.diags([1.0 / B[:-1], -(1.0 / B[:-1] + 1.0 / B[1:]), 1.0 / B[1:]], [0, 1, 2],
                      shape=(nt - 1, nt + 1))
    A = sparse.kron(sparse.diags(W, 1, shape=(nt - 1, nt + 1)), Lr) + sparse.kron(Tv, sparse.eye(nr, nr + 1))
    full = np.zeros((nt + 1, nr + 1))
    full[:, nr] = 1.0
    full[nt, :] = 1.0
    full[0, :] = 0.0
    jj, ii = np.meshgrid(np.arange(nt + 1), np.arange(nr + 1), indexing="ij")
    unk = ((jj >= 1) & (jj < nt) & (ii < nr)).ravel()
    A = A.tocsc()
    flat = full.ravel()
    x = splinalg.spsolve(A[:, np.flatnonzero(unk)].tocsc(), -(A[:, np.flatnonzero(~unk)] @ flat[~unk]))
    flat = flat.copy()
    flat[unk] = x
    return r, t, flat.reshape(nt + 1, nr + 1)


def harmonic_measure_oracle(cfg: DiffusionConfig, k: int, cells: int = 200) -> dict:
    """Probability of leaving ``Omega_k`` through ``Gamma_2`` from the start point.

    Solves the weighted Dirichlet problem at ``cells`` and ``2 cells`` and
    combines them by Richardson extrapolation (the discontinuity at the rim
    limits the order, so the difference is reported as the error estimate).
    """
    size = cfg.level_size(k)
    vals = []
    for c in (cells, 2 * cells):
        r, t, U = _cylinder_solve(cfg.weight, cfg.dim, size, size, c)
        spline = RectBivariateSpline(t, r, U, kx=3, ky=3)
        vals.append(float(spline(cfg.t0, 0.0)[0, 0]))
    value = (4 * vals[1] - vals[0]) / 3
    return {"value": value, "coarse": vals[0], "fine": vals[1], "error": abs(value - vals[1])}


# --------------------------------------------------------------------------
# mean-value property


def _field_evaluator(field_obj, weight: WeightProfile, gradient_bound=None):
    """``f(x, t)`` and ``grad(x, t) -> (|grad_x f|, |d_t f|)`` for a field.

    Reduced radial fields (``l = 0``) are interpolated with bicubic splines;
    plain callables get the constant ``gradient_bound`` (zero if omitted).
    """
    if callable(field_obj):
        g = 0.0 if gradient_bound is None else float(gradient_bound)
        return field_obj, lambda x, t: (np.full(len(t), g), np.full(len(t), g))
    if field_obj.l != 0:
        raise ValueError("mean-value check needs a rotation-invariant (l = 0) field")
    if field_obj.weight.alpha_hint != weight.alpha_hint:
        raise ValueError("field and diffusion use different weights")
    spline = RectBivariateSpline(field_obj.r, field_obj.t, field_obj.values, kx=3, ky=3)
    rmax, tmax = field_obj.r[-1], field_obj.t[-1]

    def coords(x, t):
        rr = np.linalg.norm(np.atleast_2d(x), axis=1)
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(rr > rmax) or np.any(tt > tmax) or np.any(tt < 0):
            raise ExtrapolationError("exit point outside the sampled field")
        return rr, tt

    def f(x, t):
        return spline.ev(*coords(x, t))

    def grad(x, t):
        rr, tt = coords(x, t)
        return np.abs(spline.ev(rr, tt, dx=1)), np.abs(spline.ev(rr, tt, dy=1))

    return f, grad


def _exit_points(cfg: DiffusionConfig, y, region: Region, rng, count: int):
    """Exit positions from ``region`` and the positional uncertainty of each.

    Steps shrink near every boundary part including the base, so that the
    horizontal position at an (exactly sampled) base hit is accurate too.
    Returns ``(X, T, gap_x, gap_t)``.
    """
    n = cfg.dim
    c = np.asarray(region.center, dtype=float)
    X = np.tile(np.asarray(y[0], dtype=float), (count, 1))
    T = np.full(count, float(y[1]))
    EX = np.empty_like(X)
    ET = np.empty(count)
    gap_x = np.zeros(count)
    gap_t = np.zeros(count)
    active = np.ones(count, dtype=bool)
    steps = 0
    while active.any():
        steps += 1
        if steps > cfg.step_budget:
            raise StepBudgetExceeded("mean-value paths exhausted the step budget")
        idx = np.flatnonzero(active)
        x, t = X[idx], T[idx]
        lat0 = region.radius - np.linalg.norm(x - c, axis=1)
        top0 = region.height - t
        flo0 = t - region.floor
        d = np.minimum(np.minimum(lat0, top0), flo0)
        dt = np.maximum(cfg.dt, (cfg.step_scale * d) ** 2)
        x1 = x + np.sqrt(2 * dt)[:, None] * rng.standard_normal((idx.size, n))
        t1, base = _vertical_step(t, dt, cfg.weight, rng)
        hit_lat = _plane_cross(lat0, region.radius - np.linalg.norm(x1 - c, axis=1), dt, rng)
        hit_top = _plane_cross(top0, region.height - t1, dt, rng)
        if region.floor > 0:
            hit_flo = _plane_cross(flo0, t1 - region.floor, dt, rng)
            base = np.zeros_like(base)
        else:
            hit_flo = np.zeros_like(base)
        ex = hit_lat | hit_top | hit_flo | base
        # project onto the boundary part that was hit; lateral wins ties
        px, pt = x1.copy(), t1.copy()
        dirn = (x1 - c) / np.maximum(np.linalg.norm(x1 - c, axis=1), 1e-300)[:, None]
        px[hit_lat] = c + region.radius * dirn[hit_lat]
        top_only = hit_top & ~hit_lat
        flo_only = hit_flo & ~hit_lat & ~hit_top
        base_only = base & ~hit_lat & ~hit_top
        pt[hit_lat] = np.clip(t1[hit_lat], max(region.floor, 0.0), region.height)
        pt[top_only] = region.height
        pt[flo_only] = region.floor
        pt[base_only] = 0.0
        step = np.sqrt(2 * dt)
        gx = step + np.linalg.norm(px - x1, axis=1)
        # base hits are exact in the height coordinate
        gt = np.where(base_only, 0.0, step + np.abs(pt - t1))
        X[idx], T[idx] = x1, t1
        e = idx[ex]
        EX[e], ET[e] = px[ex], pt[ex]
        gap_x[e], gap_t[e] = gx[ex], gt[ex]
        active[e] = False
    return EX, ET, gap_x, gap_t


def mean_value_check(field_obj, cfg: DiffusionConfig, y, region: Region,
                     gradient_bound: float | None = None) -> dict:
    """Compare the exit-point average of a field with its value at ``y``.

    ``field_obj`` is a rotation-invariant :class:`~.extension.ExtensionField`
    or a callable ``f(x, t)`` on arrays. The discretisation bound averages
    ``|grad_x f| gap_x + |d_t f| gap_t`` over exit points, where the gaps are
    the last step length plus the projection distance. The contract is
    ``deviation <= 3 (CI half-width + bound)``.

    Raises
    ------
    ExtrapolationError
        If an exit point falls outside the sampled field.
    """
    if not region.contains(y[0], y[1]):
        raise ValueError("y must be interior to the region")
    f, grad = _field_evaluator(field_obj, cfg.weight, gradient_bound)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xA]))
    EX, ET, gap_x, gap_t = _exit_points(cfg, y, region, rng, cfg.paths)
    vals = np.asarray(f(EX, ET), dtype=float)
    centre = float(np.asarray(f(np.atleast_2d(np.asarray(y[0], dtype=float)), np.atleast_1d(y[1]))).ravel()[0])
    mean = float(vals.mean())
    half = _Z95 * float(vals.std(ddof=1)) / math.sqrt(vals.size) if vals.size > 1 else math.inf
    gxv, gtv = grad(EX, ET)
    bound = float(np.mean(gxv * gap_x + gtv * gap_t))
    dev = abs(mean - centre)
    return {"deviation": dev, "mean": mean, "value": centre, "ci_half_width": half,
            "discretization_bound": bound, "passed": dev <= 3.0 * (half + bound)}
