"""Approximate carpets, annulus crossings and remaining sets on rasters.

Paths may touch soup curves but not enter their interiors. Sticks have no
interior; they act as barriers instead, so a path may not cross one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import InvalidSpecError, ResolutionError
from .geom import (
    Circle,
    CurveArray,
    Raster,
    Stick,
    UnitDisk,
    contains_points,
    distance_to,
    mark_interiors,
    mark_sticks,
    polyline,
    segments,
)
from .geom.domain import _origin_segment_distance
from .geom.raster import FOUR, grid_shape
from .rng import stream
from .soup import ShapeMeasure, Soup, SoupSpec, _place_all, _sample_normalized, inverse_cube_scales, sample_soup


@dataclass(frozen=True)
class CarpetQuery:
    x: tuple[float, float]
    eps: float
    pitch: float

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidSpecError(f"eps must be positive, got {self.eps}")
        if not self.pitch > 0:
            raise ResolutionError(f"pitch must be positive, got {self.pitch}")
        if self.pitch > self.eps / 4 * (1 + 1e-12):
            raise ResolutionError(f"pitch {self.pitch} exceeds eps/4 = {self.eps / 4}")


@dataclass(frozen=True)
class CrossingTrial:
    eps: float
    success: bool
    curves_used: int
    seed: int
    curves_total: int = 0
    pitch: float = math.nan
    replica: int = 0


# -- helpers ----------------------------------------------------------------------

def distances_to_point(curves: CurveArray, x) -> np.ndarray:
    """Distance from the point ``x`` to each curve."""
    x = np.asarray(x, dtype=float)
    if len(curves) == 0:
        return np.empty(0)
    if curves.kind == "circle":
        return np.abs(np.hypot(*(curves.xy - x).T) - curves.r)
    if curves.kind == "stick":
        return _origin_segment_distance(curves.a - x, curves.b - x)
    return np.array([distance_to(c, x[None])[0] for c in curves])


def radial_extent(curves: CurveArray) -> tuple[np.ndarray, np.ndarray]:
    """Smallest and largest distance from the origin over each curve."""
    if len(curves) == 0:
        return np.empty(0), np.empty(0)
    if curves.kind == "circle":
        d = np.hypot(*curves.xy.T)
        return np.abs(d - curves.r), d + curves.r
    if curves.kind == "stick":
        lo = _origin_segment_distance(curves.a, curves.b)
        hi = np.maximum(np.hypot(*curves.a.T), np.hypot(*curves.b.T))
        return lo, hi
    lo = np.array([distance_to(c, np.zeros((1, 2)))[0] for c in curves])
    hi = np.empty(len(curves))
    for k, c in enumerate(curves):
        if isinstance(c, Circle):
            hi[k] = math.hypot(*c.center) + c.radius
        else:
            hi[k] = np.hypot(*polyline(c).T).max()
    return lo, hi


def _blocked_grid(curves: CurveArray, origin, pitch, shape) -> np.ndarray:
    occ = np.zeros(shape, dtype=bool)
    mark_interiors(occ, origin, pitch, curves)
    mark_sticks(occ, origin, pitch, curves)
    return occ


def _cell_of(origin, pitch, x) -> tuple[int, int]:
    return (int(math.floor((x[0] - origin[0]) / pitch)), int(math.floor((x[1] - origin[1]) / pitch)))


# -- approximate carpet -------------------------------------------------------------

def _reaches_boundary(curves: CurveArray, domain, pitch, points) -> list[bool]:
    x0, y0, x1, y1 = domain.bbox()
    nx, ny = grid_shape((x0, y0, x1, y1), pitch)
    origin = (x0 - pitch, y0 - pitch)
    shape = (nx + 2, ny + 2)
    blocked = _blocked_grid(curves, origin, pitch, shape)
    labels, _ = ndimage.label(~blocked, structure=FOUR)
    # curves lie inside the domain, so the padded border ring is free and connected
    outside = labels[0, 0]
    out = []
    for x in points:
        i, j = _cell_of(origin, pitch, x)
        out.append(bool(outside and 0 <= i < shape[0] and 0 <= j < shape[1]
                        and labels[i, j] == outside))
    return out


def is_in_C_eps(q: CarpetQuery, soup: Soup) -> bool:
    """Whether ``q.x`` connects to the boundary of the soup's domain while
    ignoring every curve that comes within ``q.eps`` of ``q.x``."""
    curves = soup.curves
    kept = curves.take(distances_to_point(curves, q.x) >= q.eps)
    return _reaches_boundary(kept, soup.spec.domain, q.pitch, [q.x])[0]


def two_point_C_eps(x, y, soup: Soup, eps: float, pitch: float) -> tuple[bool, bool]:
    """Membership of ``x`` and ``y`` in C_eps for the same soup realization."""
    if tuple(map(float, x)) == tuple(map(float, y)):
        raise InvalidSpecError("two-point query needs distinct points")
    return (is_in_C_eps(CarpetQuery(tuple(x), eps, pitch), soup),
            is_in_C_eps(CarpetQuery(tuple(y), eps, pitch), soup))


# -- annulus crossing: cartesian grid --------------------------------------------------

class CartesianAnnulusGrid:
    """Square cells of side ``pitch`` covering the unit disk."""

    def __init__(self, pitch: float):
        self.pitch = float(pitch)
        n = int(math.ceil(2.0 / pitch)) + 2
        self.origin = (-0.5 * n * pitch, -0.5 * n * pitch)
        self.shape = (n, n)
        edges = self.origin[0] + np.arange(n + 1) * pitch
        lo, hi = edges[:-1], edges[1:]
        near = np.where(lo > 0, lo, np.where(hi < 0, -hi, 0.0))
        far = np.maximum(np.abs(lo), np.abs(hi))
        self.min_d = np.hypot(near[:, None], near[None, :])
        self.max_d = np.hypot(far[:, None], far[None, :])
        self.outer = (self.min_d <= 1.0) & (self.max_d >= 1.0)
        self.within = self.min_d <= 1.0

    def masks(self, eps: float):
        domain = self.within & (self.max_d >= eps)
        inner = (self.min_d <= eps) & (self.max_d >= eps)
        return domain, inner, self.outer

    def mark(self, occ, curves: CurveArray) -> None:
        mark_interiors(occ, self.origin, self.pitch, curves)
        mark_sticks(occ, self.origin, self.pitch, curves)

    def connected(self, free, inner, outer) -> bool:
        labels, _ = ndimage.label(free, structure=FOUR)
        a = np.unique(labels[inner & free])
        b = np.unique(labels[outer & free])
        common = np.intersect1d(a, b)
        return bool(len(common[common > 0]))


# -- annulus crossing: log-polar grid -----------------------------------------------------

class LogPolarAnnulusGrid:
    """Cells that are squares in ``(log r, theta)`` over ``eps_lo <= r <= 1``.

    A cell at radius r has side about ``r * h`` with ``h = 2 pi / n_theta``, so
    the resolution relative to the distance from the origin is the same at
    every scale. Theta is periodic.
    """

    def __init__(self, eps_lo: float, n_theta: int = 128):
        if not 0 < eps_lo < 1:
            raise InvalidSpecError(f"eps_lo must lie in (0, 1), got {eps_lo}")
        self.eps_lo = float(eps_lo)
        self.n_theta = int(n_theta)
        self.h = 2 * math.pi / self.n_theta
        self.u0 = math.log(eps_lo)
        self.n_u = max(1, int(math.ceil(-self.u0 / self.h)))
        self.hu = -self.u0 / self.n_u
        self.shape = (self.n_u, self.n_theta)
        k = np.arange(self.n_u)
        self.row_lo = self.u0 + k * self.hu
        self.row_hi = self.row_lo + self.hu
        self.outer = np.zeros(self.shape, dtype=bool)
        self.outer[-1] = True

    def masks(self, eps: float):
        le = math.log(eps)
        rows_in = (self.row_lo <= le + 1e-12) & (self.row_hi >= le - 1e-12)
        rows_dom = self.row_hi >= le - 1e-12
        domain = np.repeat(rows_dom[:, None], self.n_theta, axis=1)
        inner = np.repeat(rows_in[:, None], self.n_theta, axis=1)
        return domain, inner, self.outer

    def _cells(self, k, j) -> np.ndarray:
        r = np.exp(self.u0 + (k + 0.5) * self.hu)
        th = (j + 0.5) * self.h
        return np.column_stack([r * np.cos(th), r * np.sin(th)])

    def _row_range(self, rlo, rhi):
        k0 = np.floor((np.log(np.maximum(rlo, self.eps_lo)) - self.u0) / self.hu).astype(np.int64)
        k1 = np.floor((np.log(np.minimum(rhi, 1.0)) - self.u0) / self.hu).astype(np.int64)
        return np.clip(k0, 0, self.n_u - 1), np.clip(k1, 0, self.n_u - 1)

    def _mark_circles(self, occ, xy, r) -> None:
        if len(r) == 0:
            return
        d = np.hypot(*xy.T)
        around = d < r
        rlo = np.where(around, self.eps_lo, d - r)
        k0, k1 = self._row_range(rlo, d + r)
        half = np.where(around, math.pi, np.arcsin(np.clip(r / np.maximum(d, 1e-300), 0, 1)))
        phi = np.arctan2(xy[:, 1], xy[:, 0])
        j0 = np.floor((phi - half) / self.h).astype(np.int64)
        j1 = np.floor((phi + half) / self.h).astype(np.int64)
        j1 = np.where(around, j0 + self.n_theta - 1, np.minimum(j1, j0 + self.n_theta - 1))
        nk, nj = k1 - k0 + 1, j1 - j0 + 1
        cnt = nk * nj
        step = 1 << 21
        starts = np.concatenate([[0], np.cumsum(cnt)])
        s = 0
        while s < len(r):
            e = max(int(np.searchsorted(starts, starts[s] + step, side="right")) - 1, s + 1)
            c = cnt[s:e]
            item = np.repeat(np.arange(s, e), c)
            off = np.arange(c.sum()) - np.repeat(np.cumsum(c) - c, c)
            kk = k0[item] + off // nj[item]
            jj = j0[item] + off % nj[item]
            p = self._cells(kk, jj)
            inside = ((p - xy[item]) ** 2).sum(1) < r[item] ** 2
            occ[kk[inside], jj[inside] % self.n_theta] = True
            s = e

    def _mark_points(self, occ, pts) -> None:
        rr = np.hypot(*pts.T)
        ok = (rr >= self.eps_lo) & (rr <= 1.0)
        k = np.floor((np.log(rr[ok]) - self.u0) / self.hu).astype(np.int64)
        j = np.floor(np.arctan2(pts[ok, 1], pts[ok, 0]) / self.h).astype(np.int64) % self.n_theta
        occ[np.clip(k, 0, self.n_u - 1), j] = True

    def _mark_segments(self, occ, segs) -> None:
        if len(segs) == 0:
            return
        a, b = segs[:, :2], segs[:, 2:]
        near = np.maximum(_origin_segment_distance(a, b), self.eps_lo)
        # spacing below a third of the local cell size keeps the trace connected
        n = np.ceil(np.hypot(*(b - a).T) / (near * min(self.h, self.hu) / 3)).astype(np.int64) + 1
        item = np.repeat(np.arange(len(n)), n)
        off = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
        t = off / np.maximum(n[item] - 1, 1)
        self._mark_points(occ, a[item] + t[:, None] * (b[item] - a[item]))

    def mark(self, occ, curves: CurveArray) -> None:
        if len(curves) == 0:
            return
        if curves.kind == "circle":
            self._mark_circles(occ, curves.xy, curves.r)
            return
        if curves.kind == "stick":
            self._mark_segments(occ, np.hstack([curves.a, curves.b]))
            return
        circ = [c for c in curves if isinstance(c, Circle)]
        if circ:
            self._mark_circles(occ, np.array([c.center for c in circ]),
                               np.array([c.radius for c in circ]))
        sticks = [segments(c) for c in curves if isinstance(c, Stick)]
        if sticks:
            self._mark_segments(occ, np.vstack(sticks))
        others = [c for c in curves if not isinstance(c, (Circle, Stick))]
        if not others:
            return
        lo, hi = radial_extent(CurveArray("mixed", items=others))
        for c, rlo, rhi in zip(others, lo, hi):
            k0, k1 = self._row_range(np.array([rlo]), np.array([rhi]))
            kk, jj = np.meshgrid(np.arange(k0[0], k1[0] + 1), np.arange(self.n_theta),
                                 indexing="ij")
            kk, jj = kk.ravel(), jj.ravel()
            inside = contains_points(c, self._cells(kk, jj))
            occ[kk[inside], jj[inside]] = True

    def connected(self, free, inner, outer) -> bool:
        labels, nlab = ndimage.label(free, structure=FOUR)
        if nlab == 0:
            return False
        # glue the theta seam
        a, b = labels[:, 0], labels[:, -1]
        m = (a > 0) & (b > 0)
        if m.any():
            g = coo_matrix((np.ones(m.sum()), (a[m], b[m])), shape=(nlab + 1, nlab + 1))
            _, comp = connected_components(g, directed=False)
        else:
            comp = np.arange(nlab + 1)
        ia = np.unique(comp[labels[inner & free]])
        ib = np.unique(comp[labels[outer & free]])
        return bool(len(np.intersect1d(ia, ib)))


def sample_logpolar_curves(c: float, shape: ShapeMeasure, eps_lo: float, s_min: float,
                           seed: int, replica: int = 0) -> tuple[CurveArray, int]:
    """Soup curves with anchor radius in ``[eps_lo, 1]``, diameter at most 2 and
    diameter at least ``s_min`` times the anchor radius.

    In coordinates ``(log r, theta, s = rho / r)`` the intensity
    ``d2z drho / rho^3`` becomes ``du dtheta ds / s^3``, so anchors are uniform in
    ``(log r, theta)`` and ``s`` has density proportional to ``s^-3``.
    """
    L = -math.log(eps_lo)
    s_max = 2.0 / eps_lo
    lam = c * shape.mass * L * 2 * math.pi * (s_min ** -2 - s_max ** -2) / 2
    n = int(stream(seed, replica, 0).poisson(lam))
    u = math.log(eps_lo) + L * stream(seed, replica, 1).random(n)
    th = 2 * math.pi * stream(seed, replica, 2).random(n)
    s = inverse_cube_scales(stream(seed, replica, 3).random(n), s_min, s_max)
    gam = _sample_normalized(shape, stream(seed, replica, 4), n)
    r = np.exp(u)
    rho = s * r
    z = np.column_stack([r * np.cos(th), r * np.sin(th)])
    keep = rho <= 2.0
    cand = _place_all(gam.take(keep), z[keep], rho[keep])
    lo, hi = radial_extent(cand)
    inside = (lo > eps_lo) & (hi < 1.0)
    out = cand.take(inside)
    order = np.argsort(-out.diameters(), kind="stable")
    return out.take(order), n


# -- coupled evaluation -------------------------------------------------------------------

def crossing_outcomes(curves: CurveArray, eps_list, grid) -> list[tuple[bool, int]]:
    """``(success, curves_used)`` of the annulus crossing for each eps, all on one
    raster. Curves must already lie in the unit disk. Smaller eps only adds
    curves and cells, so the outcomes are monotone in eps by construction."""
    lo, hi = radial_extent(curves)
    eps_sorted = sorted(set(float(e) for e in eps_list), reverse=True)
    occ = np.zeros(grid.shape, dtype=bool)
    done = np.zeros(len(curves), dtype=bool)
    res = {}
    for eps in eps_sorted:
        use = (lo > eps) & (hi < 1.0)
        new = use & ~done
        if new.any():
            grid.mark(occ, curves.take(new))
            done |= new
        domain, inner, outer = grid.masks(eps)
        free = domain & ~occ
        res[eps] = (grid.connected(free, inner, outer), int(use.sum()))
    return [res[float(e)] for e in eps_list]


def _grid_for(eps_list, pitch=None, grid="cartesian", n_theta=128):
    if grid == "cartesian":
        return CartesianAnnulusGrid(pitch if pitch is not None else min(eps_list) / 8)
    if grid == "logpolar":
        return LogPolarAnnulusGrid(min(eps_list), n_theta)
    raise InvalidSpecError(f"grid must be 'cartesian' or 'logpolar', got {grid!r}")


def crossing_replica(c, shape, eps_list, seed, replica, grid_obj, eps_min=None, marks_c=None):
    """One replica of the coupled crossing experiment. Returns ``(outcomes, total)``.

    With ``marks_c`` (a sorted list of intensities) the soup is sampled once at
    the largest one and thinned by marks, giving outcomes per intensity.
    """
    if isinstance(grid_obj, LogPolarAnnulusGrid):
        if marks_c is not None:
            raise InvalidSpecError("intensity coupling is only available on the cartesian grid")
        curves, total = sample_logpolar_curves(c, shape, grid_obj.eps_lo, 2 * grid_obj.h,
                                               seed, replica)
        return crossing_outcomes(curves, eps_list, grid_obj), total
    if eps_min is None:
        eps_min = 2 * grid_obj.pitch
    top = max(marks_c) if marks_c is not None else c
    spec = SoupSpec(top, shape, UnitDisk(), eps_min, 2.0)
    soup = sample_soup(spec, seed, replica, marks=marks_c is not None)
    if marks_c is None:
        return crossing_outcomes(soup.curves, eps_list, grid_obj), soup.n_candidates
    return ([crossing_outcomes(soup.curves.take(soup.marks <= cc), eps_list, grid_obj)
             for cc in marks_c], soup.n_candidates)


def event_A_eps(c: float, shape: ShapeMeasure, eps: float, pitch: float, eps_min: float | None,
                seed: int, replica: int = 0) -> CrossingTrial:
    """One annulus-crossing trial in the unit disk on a square grid.

    The soup has diameters in ``[eps_min, 2]`` (default ``eps_min = 2 * pitch``);
    curves contained in the open ring ``eps < |z| < 1`` are kept, and the trial
    succeeds when free cells connect the cells meeting ``|z| = eps`` to the cells
    meeting ``|z| = 1``.
    """
    if not 0 < eps < 1:
        raise InvalidSpecError(f"eps must lie in (0, 1), got {eps}")
    if pitch > eps / 4 * (1 + 1e-12):
        raise ResolutionError(f"pitch {pitch} exceeds eps/4")
    grid = CartesianAnnulusGrid(pitch)
    (out,), total = crossing_replica(c, shape, [eps], seed, replica, grid, eps_min)
    return CrossingTrial(eps, out[0], out[1], int(seed), total, pitch, replica)


# -- remaining set -------------------------------------------------------------------------

def remaining_raster(soup: Soup, eps_cut: float, window, pitch: float) -> Raster:
    """Raster over ``window`` whose occupied cells are those removed by the
    interiors of soup curves with diameter greater than ``eps_cut``; the free
    cells make up the remaining set."""
    if eps_cut < soup.spec.eps_min * (1 - 1e-12):
        raise InvalidSpecError(f"eps_cut {eps_cut} is below the soup cutoff {soup.spec.eps_min}")
    curves = soup.curves.take(soup.diameters() > eps_cut)
    ras = Raster.blank(window.bbox(), pitch)
    occ = ras.occupied.copy()
    mark_interiors(occ, ras.origin, pitch, curves)
    return Raster(ras.origin, pitch, ras.nx, ras.ny, occ)


__all__ = [
    "CarpetQuery", "CartesianAnnulusGrid", "CrossingTrial", "LogPolarAnnulusGrid",
    "crossing_outcomes", "crossing_replica", "distances_to_point", "event_A_eps",
    "is_in_C_eps", "radial_extent", "remaining_raster", "sample_logpolar_curves",
    "two_point_C_eps",
]
