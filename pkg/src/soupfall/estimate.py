"""Monte Carlo drivers, exponent fits, box counting and closed-form CLE values."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .carpet import _grid_for, crossing_replica
from .exceptions import DegenerateInputError, DomainError, InsufficientDataError, InvalidSpecError
from .geom import LatticeLoop, Rect, coarsen, lattice_filled_count, mark_interiors
from .geom.raster import grid_shape
from .rng import replica_map, stream
from .soup import ShapeMeasure, SoupSpec, beta, random_walk_loops, sample_soup
from .stats import mean_ci, wilson

# -- probability tables ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PTable:
    """Crossing probabilities per eps, rows sorted by decreasing eps."""

    eps: np.ndarray
    trials: np.ndarray
    successes: np.ndarray
    p_hat: np.ndarray = field(init=False)
    ci_lo: np.ndarray = field(init=False)
    ci_hi: np.ndarray = field(init=False)
    pitch: float = math.nan

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float)
        trials = np.asarray(self.trials, dtype=np.int64)
        succ = np.asarray(self.successes, dtype=np.int64)
        if np.any(succ > trials) or np.any(succ < 0):
            raise InvalidSpecError("successes must lie between 0 and trials")
        order = np.argsort(-eps, kind="stable")
        eps, trials, succ = eps[order], trials[order], succ[order]
        p = succ / np.maximum(trials, 1)
        lo, hi = wilson(succ, trials)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "trials", trials)
        object.__setattr__(self, "successes", succ)
        object.__setattr__(self, "p_hat", p)
        object.__setattr__(self, "ci_lo", np.minimum(lo, p))
        object.__setattr__(self, "ci_hi", np.maximum(hi, p))

    def __len__(self) -> int:
        return len(self.eps)

    def rows(self):
        return list(zip(self.eps.tolist(), self.trials.tolist(), self.successes.tolist(),
                        self.p_hat.tolist(), self.ci_lo.tolist(), self.ci_hi.tolist()))

    def p(self, eps: float) -> float:
        return float(self.p_hat[np.flatnonzero(np.isclose(self.eps, eps))[0]])

    def stderr(self, eps: float) -> float:
        k = np.flatnonzero(np.isclose(self.eps, eps))[0]
        p, n = self.p_hat[k], self.trials[k]
        return float(math.sqrt(p * (1 - p) / n))

    HEADER = ("eps", "trials", "successes", "p_hat", "ci_lo", "ci_hi")


@dataclass(frozen=True)
class CrossingRun:
    """A PTable together with the per-replica outcomes it was built from."""

    table: PTable
    outcomes: np.ndarray  # (replicas, len(eps)) bool, columns in the caller's eps order
    kept: np.ndarray  # (replicas, len(eps)) curves used per trial
    totals: np.ndarray  # (replicas,) candidates sampled
    eps: tuple
    seed: int
    pitch: float

    def trial_rows(self):
        """Rows ``eps, seed, replica, success, curves_total, curves_kept, pitch``."""
        out = []
        for k, e in enumerate(self.eps):
            for r in range(len(self.outcomes)):
                out.append((e, self.seed, r, bool(self.outcomes[r, k]), int(self.totals[r]),
                            int(self.kept[r, k]), self.pitch))
        return out

    TRIAL_HEADER = ("eps", "seed", "replica", "success", "curves_total", "curves_kept", "pitch")


def _crossing_task(r, c, shape, eps_list, seed, grid_obj, eps_min):
    out, total = crossing_replica(c, shape, eps_list, seed, r, grid_obj, eps_min)
    return [o[0] for o in out], [o[1] for o in out], total


def run_crossings(c: float, shape: ShapeMeasure, eps_list, replicas: int, seed: int,
                  pitch_rule: float = 8.0, grid: str = "cartesian", eps_min: float | None = None,
                  n_theta: int = 128, threads: int = 1) -> CrossingRun:
    """Coupled annulus-crossing trials: each replica evaluates every eps on one soup.

    On the cartesian grid the pitch is ``min(eps_list) / pitch_rule`` and the
    soup cutoff ``eps_min`` defaults to twice the pitch. On the log-polar grid
    ``n_theta`` sets the angular resolution and the cutoff scales with the
    distance to the origin.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(not 0 < e < 1 for e in eps_list):
        raise InvalidSpecError("eps_list must be a non-empty list of values in (0, 1)")
    if replicas < 1:
        raise InvalidSpecError("replicas must be >= 1")
    pitch = min(eps_list) / float(pitch_rule)
    g = _grid_for(eps_list, pitch, grid, n_theta)
    task = partial(_crossing_task, c=c, shape=shape, eps_list=eps_list, seed=seed, grid_obj=g,
                   eps_min=eps_min)
    rows = replica_map(task, replicas, threads)
    outcomes = np.array([r[0] for r in rows], dtype=bool).reshape(replicas, len(eps_list))
    kept = np.array([r[1] for r in rows], dtype=np.int64).reshape(replicas, len(eps_list))
    totals = np.array([r[2] for r in rows], dtype=np.int64)
    uniq = sorted(set(eps_list), reverse=True)
    col = {e: eps_list.index(e) for e in uniq}
    table = PTable(np.array(uniq), np.full(len(uniq), replicas),
                   np.array([outcomes[:, col[e]].sum() for e in uniq]),
                   pitch if grid == "cartesian" else math.nan)
    return CrossingRun(table, outcomes, kept, totals, tuple(eps_list), int(seed),
                       pitch if grid == "cartesian" else math.nan)


def estimate_p(c: float, shape: ShapeMeasure, eps_list, replicas: int, pitch_rule: float = 8.0,
               seed: int = 0, grid: str = "cartesian", eps_min: float | None = None,
               n_theta: int = 128, threads: int = 1) -> PTable:
    """Table of crossing probabilities ``P(A_eps)`` with Wilson intervals."""
    if replicas < 100:
        raise InvalidSpecError(f"replicas must be >= 100, got {replicas}")
    return run_crossings(c, shape, eps_list, replicas, seed, pitch_rule, grid, eps_min,
                         n_theta, threads).table


# -- exponent fits ----------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentReport:
    alpha_hat: float
    stderr: float
    r2: float
    dim_hat: float
    bracket_ok: bool
    intercept: float = 0.0
    n_rows: int = 0

    def as_dict(self) -> dict:
        return {"alpha_hat": self.alpha_hat, "stderr": self.stderr, "r2": self.r2,
                "dim_hat": self.dim_hat, "bracket_ok": self.bracket_ok,
                "intercept": self.intercept, "n_rows": self.n_rows}


def _wls(x, y, w):
    """Weighted straight-line fit. Returns slope, intercept, slope stderr, r2."""
    X = np.column_stack([np.ones_like(x), x])
    W = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * W[:, None], y * W, rcond=None)
    resid = y - X @ coef
    cov = np.linalg.inv(X.T @ (X * w[:, None]))
    dof = len(x) - 2
    chi2 = float((w * resid ** 2).sum())
    scale = max(1.0, chi2 / dof) if dof > 0 else 1.0
    ybar = float((w * y).sum() / w.sum())
    ss_tot = float((w * (y - ybar) ** 2).sum())
    r2 = 1.0 - chi2 / ss_tot if ss_tot > 0 else 1.0
    return float(coef[1]), float(coef[0]), float(math.sqrt(cov[1, 1] * scale)), r2


def fit_alpha(pt: PTable) -> ExponentReport:
    """Weighted least squares of ``log p_hat`` on ``log eps``.

    Weights are inverse delta-method variances ``n p / (1 - p + 1/n)`` of
    ``log p_hat``; the stderr is inflated by the reduced chi-square when that
    exceeds one. ``bracket_ok`` checks ``eps^alpha <= p_hat (1 + 3 sigma)`` on
    every row, ``sigma`` being the relative binomial error.
    """
    if len(pt) < 3:
        raise InsufficientDataError(f"need at least 3 rows, got {len(pt)}")
    low = pt.successes < 10
    if low.any():
        raise InsufficientDataError(
            f"rows with fewer than 10 successes: eps = {pt.eps[low].tolist()}")
    n = pt.trials.astype(float)
    p = pt.p_hat
    var = (1 - p + 1 / n) / (n * p)
    x, y = np.log(pt.eps), np.log(p)
    slope, icpt, se, r2 = _wls(x, y, 1 / var)
    rel = np.sqrt((1 - p) / (n * p))
    ok = bool(np.all(pt.eps ** slope <= p * (1 + 3 * rel)))
    return ExponentReport(slope, se, r2, 2.0 - slope, ok, icpt, len(pt))


def box_counts(mask: np.ndarray, factors) -> np.ndarray:
    """Number of ``k x k`` blocks holding at least one set cell, per factor ``k``."""
    return np.array([int(coarsen(mask, int(k)).sum()) for k in factors], dtype=np.int64)


def box_dimension(scales, counts) -> ExponentReport:
    """Least-squares slope of ``log N`` against ``log(1/scale)``.

    ``dim_hat`` is the slope; ``alpha_hat`` is ``2 - dim_hat``.
    """
    scales = np.asarray(scales, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if len(scales) < 3:
        raise InsufficientDataError(f"need at least 3 scales, got {len(scales)}")
    if np.any(counts <= 0):
        raise DegenerateInputError("a scale has no occupied boxes")
    slope, icpt, se, r2 = _wls(-np.log(scales), np.log(counts), np.ones(len(scales)))
    # plain least squares: use the residual-based stderr
    x = -np.log(scales)
    resid = np.log(counts) - (icpt + slope * x)
    dof = len(x) - 2
    se = float(math.sqrt((resid ** 2).sum() / dof / ((x - x.mean()) ** 2).sum())) if dof > 0 else 0.0
    return ExponentReport(2.0 - slope, se, r2, slope, True, icpt, len(scales))


# -- remaining set -------------------------------------------------------------------------


def _remaining_mask(c, shape, eps_cut, rho_max, window, pitch, seed, replica):
    x0, y0, x1, y1 = window.bbox()
    dom = Rect(x0 - rho_max, y0 - rho_max, x1 + rho_max, y1 + rho_max)
    soup = sample_soup(SoupSpec(c, shape, dom, eps_cut, rho_max), seed, replica)
    nx, ny = grid_shape((x0, y0, x1, y1), pitch)
    occ = np.zeros((nx, ny), dtype=bool)
    mark_interiors(occ, (x0, y0), pitch, soup.curves.take(soup.diameters() > eps_cut))
    return ~occ


def _fraction_task(r, c, shape, eps_cut, rho_max, window, pitch, seed):
    free = _remaining_mask(c, shape, eps_cut, rho_max, window, pitch, seed, r)
    return int(free.sum()), free.size


@dataclass(frozen=True)
class RemainingFraction:
    survivors: int
    samples: int
    fraction: float
    stderr: float
    expected: float | None


def remaining_fraction(c: float, shape: ShapeMeasure, eps_cut: float, rho_max: float, window,
                       pitch: float, replicas: int, seed: int, threads: int = 1) -> RemainingFraction:
    """Share of cell centres of ``window`` outside every curve interior, for soups
    with diameters in ``[eps_cut, rho_max]`` sampled on the window inflated by
    ``rho_max`` (so every curve that can cover the window is present).

    For circle shapes the exact value is ``(eps_cut / rho_max) ** (c * m * pi / 4)``.
    """
    task = partial(_fraction_task, c=c, shape=shape, eps_cut=eps_cut, rho_max=rho_max,
                   window=window, pitch=pitch, seed=seed)
    rows = replica_map(task, replicas, threads)
    k = sum(r[0] for r in rows)
    n = sum(r[1] for r in rows)
    f = k / n
    exp = None
    if shape.kind in ("circle", "stick", "discrete_stick"):
        exp = (eps_cut / rho_max) ** (c * beta(shape).mean)
    return RemainingFraction(k, n, f, math.sqrt(f * (1 - f) / n), exp)


def _boxcount_task(r, c, shape, eps_cut, rho_max, window, pitch, factors, seed):
    free = _remaining_mask(c, shape, eps_cut, rho_max, window, pitch, seed, r)
    return box_counts(free, factors)


def remaining_set_dimension(c: float, shape: ShapeMeasure, eps_cut: float, rho_max: float,
                            window, pitch: float, factors, replicas: int, seed: int,
                            threads: int = 1) -> tuple[ExponentReport, np.ndarray, np.ndarray]:
    """Box-counting dimension of the remaining set, with counts averaged over
    replicas before the log-log fit. Returns the report, scales and mean counts."""
    task = partial(_boxcount_task, c=c, shape=shape, eps_cut=eps_cut, rho_max=rho_max,
                   window=window, pitch=pitch, factors=list(factors), seed=seed)
    counts = np.array(replica_map(task, replicas, threads), dtype=float).mean(axis=0)
    scales = pitch * np.asarray(factors, dtype=float)
    return box_dimension(scales, counts), scales, counts


# -- phase scan ------------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseScan:
    c: np.ndarray
    trials: np.ndarray
    successes: np.ndarray
    p_hat: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    bracket: tuple | None

    HEADER = ("c", "trials", "successes", "p_hat", "ci_lo", "ci_hi")

    def rows(self):
        return list(zip(self.c.tolist(), self.trials.tolist(), self.successes.tolist(),
                        self.p_hat.tolist(), self.ci_lo.tolist(), self.ci_hi.tolist()))


def _phase_task(r, cs, shape, eps, seed, grid_obj):
    outs, _ = crossing_replica(cs[-1], shape, [eps], seed, r, grid_obj, None, marks_c=cs)
    return [o[0][0] for o in outs]


def phase_scan(shape: ShapeMeasure, c_grid, eps_fixed: float, replicas: int, seed: int,
               pitch_rule: float = 8.0, threads: int = 1) -> PhaseScan:
    """Crossing probability of ``A_eps_fixed`` along a grid of intensities.

    One marked soup per replica serves every intensity, so each replica's
    outcome is non-increasing in c. ``bracket`` holds the consecutive grid
    values between which ``p_hat`` drops below 1/2, if any.
    """
    cs = [float(c) for c in c_grid]
    if any(b <= a for a, b in zip(cs, cs[1:])):
        raise InvalidSpecError("c_grid must be strictly increasing")
    g = _grid_for([eps_fixed], eps_fixed / pitch_rule, "cartesian")
    task = partial(_phase_task, cs=cs, shape=shape, eps=float(eps_fixed), seed=seed, grid_obj=g)
    out = np.array(replica_map(task, replicas, threads), dtype=bool).reshape(replicas, len(cs))
    succ = out.sum(0)
    trials = np.full(len(cs), replicas)
    p = succ / replicas
    lo, hi = wilson(succ, trials)
    bracket = None
    for k in range(len(cs) - 1):
        if p[k] >= 0.5 > p[k + 1]:
            bracket = (cs[k], cs[k + 1])
            break
    return PhaseScan(np.array(cs), trials, succ, p, np.minimum(lo, p), np.maximum(hi, p), bracket)


# -- CLE closed forms ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CleValues:
    c: float
    kappa: float
    d: float
    d_closed: float
    boundary_dim: float
    delta: float | None = None

    def as_dict(self) -> dict:
        out = {"c": self.c, "kappa": self.kappa, "d": self.d, "boundary_dim": self.boundary_dim}
        if self.delta is not None:
            out["delta"] = self.delta
        return out


def kappa_of_c(c: float) -> float:
    """Root in (8/3, 4] of ``c = (3 kappa - 8)(6 - kappa) / (2 kappa)``."""
    b = 26.0 - 2.0 * c
    return (b - math.sqrt(max(b * b - 576.0, 0.0))) / 6.0


def cle_values(c: float, beta_value: float | None = None) -> CleValues:
    """Carpet dimension, SLE parameter and hole-boundary dimension for intensity c."""
    c = float(c)
    if not 0 < c <= 1:
        raise DomainError(f"c must lie in (0, 1], got {c}")
    k = kappa_of_c(c)
    d = 2.0 - (3 * k - 8) * (8 - k) / (32 * k)
    d2 = 2.0 - c / 16 - (5 + c - math.sqrt(25 + c * c - 26 * c)) / 96
    if abs(d - d2) > 1e-9:
        raise AssertionError(f"carpet dimension formulas disagree at c={c}: {d} vs {d2}")
    delta = None if beta_value is None else 2.0 - c * beta_value
    return CleValues(c, k, d, d2, 1.0 + k / 8, delta)


# -- small-c report -----------------------------------------------------------------------------


@dataclass(frozen=True)
class SmallCRow:
    c: float
    alpha_hat: float
    stderr: float
    ratio: float
    beta: float
    inequality_ok: bool
    r2: float

    HEADER = ("c", "alpha_hat", "stderr", "alpha_over_c", "beta", "inequality_ok", "r2")

    def row(self):
        return (self.c, self.alpha_hat, self.stderr, self.ratio, self.beta, self.inequality_ok,
                self.r2)


def small_c_report(shape: ShapeMeasure, c_list, eps_list, replicas: int, seed: int,
                   grid: str = "logpolar", n_theta: int = 128, pitch_rule: float = 8.0,
                   threads: int = 1) -> tuple[list[SmallCRow], list[PTable]]:
    """Per intensity: crossing table, exponent fit and ``alpha_hat / c`` against beta.

    ``inequality_ok`` records ``alpha_hat >= c beta - 3 stderr``, which holds
    because the approximate carpet sits inside the remaining set.
    """
    b = beta(shape).mean
    rows, tables = [], []
    for k, c in enumerate(c_list):
        pt = estimate_p(c, shape, eps_list, replicas, pitch_rule, seed + k, grid, None,
                        n_theta, threads)
        rep = fit_alpha(pt)
        rows.append(SmallCRow(float(c), rep.alpha_hat, rep.stderr, rep.alpha_hat / c, b,
                              bool(rep.alpha_hat >= c * b - 3 * rep.stderr), rep.r2))
        tables.append(pt)
    return rows, tables


# -- random walk loop area --------------------------------------------------------------------


@dataclass(frozen=True)
class RwAreaReport:
    n: int
    replicas: int
    mean_area: float
    half_width: float
    expected: float
    ratio: float


def rw_area_check(n: int, replicas: int, seed: int, batch: int = 256) -> RwAreaReport:
    """Mean filled area of uniform closed walks of length 2n, compared with
    ``(pi / 5) n``, the Brownian loop value at the matching time scale (each
    coordinate of the walk has variance 1/2 per step)."""
    if n < 1 or replicas < 1:
        raise InvalidSpecError("n and replicas must be >= 1")
    areas = []
    for b, start in enumerate(range(0, replicas, batch)):
        k = min(batch, replicas - start)
        walks = random_walk_loops(int(n), k, stream(seed, b, 7))
        areas.extend(lattice_filled_count(LatticeLoop((0, 0), w)) for w in walks)
    m, hw = mean_ci(areas)
    exp = math.pi / 5 * n
    return RwAreaReport(int(n), int(replicas), m, hw, exp, m / exp)
