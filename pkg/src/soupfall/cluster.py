"""Crossing graphs, loop clusters, sequential exploration and gamma-star."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .exceptions import ExplorationCapError, InvalidSpecError, WindowTooSmallError
from .geom import (
    Circle,
    CurveArray,
    Rect,
    curves_cross,
    filled_area,
    place,
    polyline,
)
from .rng import replica_map, stream
from .soup import BetaEstimate, ShapeMeasure, Soup, SoupSpec, _sample_normalized, beta, sample_soup
from .stats import mean_ci

# -- vectorised crossing tests -----------------------------------------------


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_meet(a0, a1, b0, b1) -> np.ndarray:
    """Closed segment intersection, elementwise over broadcast arrays of points."""
    o1 = _orient(a0[..., 0], a0[..., 1], a1[..., 0], a1[..., 1], b0[..., 0], b0[..., 1])
    o2 = _orient(a0[..., 0], a0[..., 1], a1[..., 0], a1[..., 1], b1[..., 0], b1[..., 1])
    o3 = _orient(b0[..., 0], b0[..., 1], b1[..., 0], b1[..., 1], a0[..., 0], a0[..., 1])
    o4 = _orient(b0[..., 0], b0[..., 1], b1[..., 0], b1[..., 1], a1[..., 0], a1[..., 1])
    proper = (o1 * o2 <= 0) & (o3 * o4 <= 0)
    coll = (o1 == 0) & (o2 == 0)
    # collinear pairs need overlapping projections on both axes
    lo_a, hi_a = np.minimum(a0, a1), np.maximum(a0, a1)
    lo_b, hi_b = np.minimum(b0, b1), np.maximum(b0, b1)
    overlap = ((lo_a <= hi_b) & (lo_b <= hi_a)).all(axis=-1)
    return np.where(coll, overlap, proper)


def _point_segment_dist(p, a, b):
    d = b - a
    dd = np.maximum((d * d).sum(-1), 1e-300)
    t = np.clip(((p - a) * d).sum(-1) / dd, 0.0, 1.0)
    q = a + t[..., None] * d
    return np.sqrt(((p - q) ** 2).sum(-1))


def cross_pairs(curves: CurveArray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """``curves_cross(curves[i[k]], curves[j[k]])`` for every k."""
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    if curves.kind == "circle":
        d = np.hypot(*(curves.xy[i] - curves.xy[j]).T)
        ri, rj = curves.r[i], curves.r[j]
        return (np.abs(ri - rj) < d) & (d < ri + rj)
    if curves.kind == "stick":
        return _segments_meet(curves.a[i], curves.b[i], curves.a[j], curves.b[j])
    items = curves.items
    return np.array([curves_cross(items[a], items[b]) for a, b in zip(i, j)], dtype=bool)


def cross_matrix(a: CurveArray, b: CurveArray) -> np.ndarray:
    """Boolean matrix ``M[k, l] = curves_cross(a[k], b[l])``."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=bool)
    if a.kind == b.kind == "circle":
        d = np.hypot(a.xy[:, None, 0] - b.xy[None, :, 0], a.xy[:, None, 1] - b.xy[None, :, 1])
        ra, rb = a.r[:, None], b.r[None, :]
        return (np.abs(ra - rb) < d) & (d < ra + rb)
    if a.kind == b.kind == "stick":
        return _segments_meet(a.a[:, None], a.b[:, None], b.a[None], b.b[None])
    if a.kind == "circle" and b.kind == "stick":
        return _point_segment_dist(a.xy[:, None], b.a[None], b.b[None]) < a.r[:, None]
    if a.kind == "stick" and b.kind == "circle":
        return cross_matrix(b, a).T
    out = np.zeros((len(a), len(b)), dtype=bool)
    bb_a, bb_b = a.bboxes(), b.bboxes()
    for k in range(len(a)):
        near = np.flatnonzero(_bbox_overlap(bb_a[k][None], bb_b))
        ck = a[k]
        for l in near:
            out[k, l] = curves_cross(ck, b[int(l)])
    return out


def _bbox_overlap(p, q) -> np.ndarray:
    return ((p[..., 0] <= q[..., 2]) & (q[..., 0] <= p[..., 2])
            & (p[..., 1] <= q[..., 3]) & (q[..., 1] <= p[..., 3]))


def crosses_any(new: CurveArray, old: CurveArray) -> np.ndarray:
    """For each curve of ``new``, whether it crosses at least one curve of ``old``."""
    out = np.zeros(len(new), dtype=bool)
    if len(new) == 0 or len(old) == 0:
        return out
    step = max(1, 4_000_000 // max(len(old), 1))
    for s in range(0, len(new), step):
        out[s:s + step] = cross_matrix(new.take(np.arange(s, min(s + step, len(new)))), old).any(1)
    return out


# -- spatial hash ---------------------------------------------------------------

def candidate_pairs(bboxes: np.ndarray, cell: float) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs ``i < j`` whose bounding boxes overlap, found through a uniform
    grid of the given cell size. The result does not depend on ``cell``."""
    n = len(bboxes)
    if n < 2:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    lo = np.floor(bboxes[:, :2] / cell).astype(np.int64)
    hi = np.floor(bboxes[:, 2:] / cell).astype(np.int64)
    span = hi - lo + 1
    cnt = span[:, 0] * span[:, 1]
    item = np.repeat(np.arange(n), cnt)
    off = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    cx = lo[item, 0] + off // span[item, 1]
    cy = lo[item, 1] + off % span[item, 1]
    key = (cx - cx.min()) * (cy.max() - cy.min() + 1) + (cy - cy.min())
    order = np.lexsort((item, key))
    key, item = key[order], item[order]
    start = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    size = np.diff(np.r_[start, len(key)])
    grp_start = np.repeat(start, size)
    grp_end = grp_start + np.repeat(size, size)
    pos = np.arange(len(key))
    partners = grp_end - pos - 1
    left = np.repeat(pos, partners)
    right = left + 1 + (np.arange(partners.sum()) - np.repeat(np.cumsum(partners) - partners, partners))
    i, j = item[left], item[right]
    i, j = np.minimum(i, j), np.maximum(i, j)
    code = np.unique(i * n + j)
    i, j = code // n, code % n
    keep = _bbox_overlap(bboxes[i], bboxes[j])
    return i[keep], j[keep]


@dataclass(frozen=True, eq=False)
class CrossingGraph:
    n: int
    edges: np.ndarray  # (m, 2), rows i < j, lexicographically sorted

    def __eq__(self, other):
        return (isinstance(other, CrossingGraph) and self.n == other.n
                and np.array_equal(self.edges, other.edges))


def _curves_of(obj) -> tuple[CurveArray, float | None, float | None]:
    if isinstance(obj, Soup):
        return obj.curves, obj.spec.eps_min, obj.spec.rho_max
    arr = obj if isinstance(obj, CurveArray) else CurveArray.from_curves(obj)
    return arr, None, None


def crossing_graph(soup, method: str = "hash", cell: float | None = None) -> CrossingGraph:
    """Edges ``(i, j)``, ``i < j``, between crossing curves.

    ``method="hash"`` tests only bounding-box candidates from a uniform grid
    (cell size: median diameter clamped to the soup's cutoffs);
    ``method="brute"`` tests every pair.
    """
    curves, lo, hi = _curves_of(soup)
    n = len(curves)
    if n < 2:
        return CrossingGraph(n, np.empty((0, 2), dtype=np.int64))
    if method == "brute":
        i, j = np.triu_indices(n, 1)
    elif method == "hash":
        if cell is None:
            d = curves.diameters()
            cell = float(np.median(d))
            if lo is not None:
                cell = min(max(cell, lo), hi)
        i, j = candidate_pairs(curves.bboxes(), cell)
    else:
        raise ValueError(f"unknown method {method!r}")
    ok = cross_pairs(curves, i, j)
    edges = np.column_stack([i[ok], j[ok]]).astype(np.int64)
    if len(edges):
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    return CrossingGraph(n, edges)


# -- union find -----------------------------------------------------------------

class UnionFind:
    """Disjoint sets over ``0..n-1`` with union by size and path halving."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True

    def labels(self) -> np.ndarray:
        """Canonical labels: each set is named by its smallest element's rank."""
        roots = np.array([self.find(x) for x in range(len(self.parent))], dtype=np.int64)
        _, first = np.unique(roots, return_index=True)
        rank = np.empty(len(first), dtype=np.int64)
        rank[np.argsort(first)] = np.arange(len(first))
        _, inv = np.unique(roots, return_inverse=True)
        return rank[inv]


def union_diameter(curves: CurveArray) -> float:
    """Diameter of the union of the curves."""
    if len(curves) == 0:
        return 0.0
    if curves.kind == "circle":
        pts, rad = curves.xy, curves.r
    else:
        blocks, radii = [], []
        for c in curves:
            if isinstance(c, Circle):
                blocks.append(np.asarray([c.center]))
                radii.append([c.radius])
            else:
                v = polyline(c)
                blocks.append(v)
                radii.append(np.zeros(len(v)))
        pts, rad = np.vstack(blocks), np.concatenate(radii)
    if len(pts) > 1500:
        # a circle of radius r is within r(1 - cos(pi/256)) of its inscribed 512-gon
        if np.any(rad > 0):
            th = np.linspace(0, 2 * np.pi, 512, endpoint=False)
            ring = np.column_stack([np.cos(th), np.sin(th)])
            pts = (pts[:, None, :] + rad[:, None, None] * ring[None]).reshape(-1, 2)
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass  # collinear points: keep them all
        d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        return float(d.max())
    d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1)) + rad[:, None] + rad[None]
    return float(d.max())


@dataclass(frozen=True, eq=False)
class Cluster:
    members: np.ndarray
    bbox: tuple[float, float, float, float]
    diameter: float


@dataclass(frozen=True, eq=False)
class ClusterSet:
    """Partition of a soup into crossing clusters.

    Clusters are numbered in decreasing order of their largest member, which
    for a sorted soup is increasing order of the smallest member index.
    """

    curves: CurveArray
    labels: np.ndarray
    clusters: tuple[Cluster, ...]
    _areas: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.clusters)

    def members(self, cid: int) -> CurveArray:
        return self.curves.take(self.clusters[cid].members)

    def diameters(self) -> np.ndarray:
        return np.array([c.diameter for c in self.clusters])

    def sizes(self) -> np.ndarray:
        return np.array([len(c.members) for c in self.clusters], dtype=np.int64)


def labels_from_edges(n: int, edges: np.ndarray) -> np.ndarray:
    uf = UnionFind(n)
    for a, b in edges.tolist():
        uf.union(a, b)
    return uf.labels()


def _build_clusters(curves: CurveArray, labels: np.ndarray) -> ClusterSet:
    if len(curves) == 0:
        return ClusterSet(curves, labels, ())
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.r_[True, labels[order][1:] != labels[order][:-1], True])
    bb = curves.bboxes()
    out = []
    for s, e in zip(bounds[:-1], bounds[1:]):
        idx = order[s:e]
        box = (float(bb[idx, 0].min()), float(bb[idx, 1].min()),
               float(bb[idx, 2].max()), float(bb[idx, 3].max()))
        out.append(Cluster(idx, box, union_diameter(curves.take(idx))))
    return ClusterSet(curves, labels, tuple(out))


def clusters(soup, method: str = "hash") -> ClusterSet:
    """Union-find over the crossing graph of ``soup``."""
    curves, _, _ = _curves_of(soup)
    g = crossing_graph(soup, method)
    return _build_clusters(curves, labels_from_edges(len(curves), g.edges))


def cluster_filling(cs: ClusterSet, cid: int, pitch: float) -> float:
    """Filled area of the union of one cluster's curves."""
    key = (cid, pitch)
    if key not in cs._areas:
        cs._areas[key] = filled_area(cs.members(cid), pitch)
    return cs._areas[key]


def component_of(curves: CurveArray, root: int) -> np.ndarray:
    """Indices of the crossing cluster containing ``curves[root]``, sorted."""
    g = crossing_graph(curves)
    lab = labels_from_edges(len(curves), g.edges)
    return np.flatnonzero(lab == lab[root])


# -- sequential exploration -----------------------------------------------------

def explore_clusters_sequential(domain, c: float, shape: ShapeMeasure, eps_min: float, seed: int,
                                rho_max: float | None = None, replica: int = 0,
                                cap: int = 10_000) -> list[CurveArray]:
    """Clusters built one at a time from independent soups.

    ``gamma^n`` is the largest curve of a first soup that crosses none of the
    clusters found so far; a fresh soup restricted to curves smaller than
    ``gamma^n`` that cross none of those clusters supplies the companions, and
    ``K_n`` is the cluster of ``gamma^n`` among them. Fresh soup ``n`` uses the
    substream ``(replica, n)`` of ``seed``.
    """
    base = SoupSpec(c, shape, domain, eps_min, rho_max)
    first = sample_soup(base, seed, (replica, 0))
    pool = first.curves
    used = np.zeros(len(pool), dtype=bool)
    found: list[CurveArray] = []
    taken = CurveArray.empty(pool.kind)
    k = 0
    while not used.all():
        # the pool is sorted, so the first unused curve is the largest one left
        g = int(np.argmin(used))
        used[g] = True
        k += 1
        if k > cap:
            raise ExplorationCapError(f"sequential exploration exceeded {cap} clusters")
        top = float(pool.diameters()[g])
        head = pool.take([g])
        members = head
        if top > eps_min:
            spec = SoupSpec(c, shape, domain, eps_min, top)
            fresh = sample_soup(spec, seed, (replica, k)).curves
            fresh = fresh.take(fresh.diameters() < top)
            fresh = fresh.take(~crosses_any(fresh, taken))
            if len(fresh):
                both = head.concat(fresh)
                members = both.take(component_of(both, 0))
        found.append(members)
        taken = taken.concat(members)
        # pool curves crossing the new cluster can never be picked later
        rest = np.flatnonzero(~used)
        used[rest[crosses_any(pool.take(rest), members)]] = True
    return found


# -- gamma star -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GammaStar:
    seed_curve: object
    cluster_members: CurveArray
    filled_area: float
    diameter: float
    truncated: bool


def _gamma_star_members(c, shape, W, eps_min, seed, replica, marks=False):
    rng = stream(seed, replica, 100)
    g = _sample_normalized(shape, rng, 1)
    bb = g.bboxes()[0]
    ctr = 0.5 * (bb[:2] + bb[2:])
    g0 = CurveArray.from_curves([place(g[0], (-ctr[0], -ctr[1]), 1.0)])
    window = Rect.square(W)
    soup = sample_soup(SoupSpec(c, shape, window, eps_min, 1.0), seed, replica, marks=marks)
    keep = soup.diameters() < 1.0
    return g0, soup.take(keep)


def _gamma_star_from(g0: CurveArray, soup_curves: CurveArray, W: float, pitch: float):
    both = g0.concat(soup_curves)
    idx = component_of(both, 0) if len(soup_curves) else np.array([0])
    members = both.take(idx)
    bb = members.bboxes()
    box = (bb[:, 0].min(), bb[:, 1].min(), bb[:, 2].max(), bb[:, 3].max())
    # companions have diameter < 1, so a cluster reaching within 1 of the
    # window edge may have lost members outside it
    truncated = bool(min(box[0] + W, box[1] + W, W - box[2], W - box[3]) < 1.0)
    area = filled_area(members, pitch)
    return GammaStar(g0[0], members, area, union_diameter(members), truncated)


def sample_gamma_star(c: float, shape: ShapeMeasure, W: float, eps_min: float, pitch: float,
                      seed: int, replica: int = 0) -> GammaStar:
    """Filling of the cluster of a unit-diameter curve centred at the origin
    inside a soup on ``[-W, W]^2`` with diameters in ``[eps_min, 1)``."""
    if W < 4:
        raise InvalidSpecError(f"W must be >= 4, got {W}")
    if not 0 < eps_min < 1:
        raise InvalidSpecError(f"eps_min must lie in (0, 1), got {eps_min}")
    g0, soup = _gamma_star_members(c, shape, W, eps_min, seed, replica)
    return _gamma_star_from(g0, soup.curves, W, pitch)


def gamma_star_coupled(cs, shape, W, eps_min, pitch, seed, replica=0) -> list[GammaStar]:
    """gamma-star for several intensities built from one marked soup."""
    cs = sorted(cs)
    g0, soup = _gamma_star_members(cs[-1], shape, W, eps_min, seed, replica, marks=True)
    return [_gamma_star_from(g0, soup.curves.take(soup.marks <= c), W, pitch) for c in cs]


@dataclass(frozen=True)
class BetaStarReport:
    estimate: BetaEstimate
    truncated: int
    replicas: int
    diameters: np.ndarray = field(repr=False)
    areas: np.ndarray = field(repr=False)

    @property
    def truncation_rate(self) -> float:
        return self.truncated / self.replicas

    def tail(self, x_lo: float = 4.0, x_hi: float = 8.0, points: int = 9) -> "TailFit":
        return tail_fit(self.diameters, x_lo, x_hi, points)


@dataclass(frozen=True)
class TailFit:
    """Log-log slope of the empirical survival function ``P(|gamma*| > x)``.

    ``slope`` is ``-inf`` when no sample exceeds ``x_lo`` (the tail is empty on
    the whole range); ``upper_bound`` is then the one-sided 95% bound ``3 / n``
    on ``P(|gamma*| > x_lo)``. With a single non-empty point the slope is
    undefined and reported as nan.
    """

    x: np.ndarray
    survival: np.ndarray
    exceed: np.ndarray
    slope: float
    upper_bound: float


def tail_fit(diameters, x_lo: float = 4.0, x_hi: float = 8.0, points: int = 9) -> TailFit:
    d = np.asarray(diameters, dtype=float)
    n = max(len(d), 1)
    xs = np.geomspace(x_lo, x_hi, points)
    exceed = np.array([int((d > x).sum()) for x in xs])
    surv = exceed / n
    pos = exceed > 0
    if not pos.any():
        slope = -math.inf
    elif pos.sum() == 1:
        slope = math.nan
    else:
        # zero-survival points beyond the last exceedance are left out of the fit
        slope = float(np.polyfit(np.log(xs[pos]), np.log(surv[pos]), 1)[0])
    return TailFit(xs, surv, exceed, slope, float(surv[0]) if exceed[0] else 3.0 / n)


def _gs_row(i, c, shape, W, eps_min, pitch, seed):
    g = sample_gamma_star(c, shape, W, eps_min, pitch, seed, i)
    return g.filled_area, g.diameter, g.truncated


def beta_star_run(c, shape, W, eps_min, pitch, replicas, seed, threads=1) -> BetaStarReport:
    """Monte Carlo run of gamma-star with per-sample areas and diameters kept."""
    if replicas < 100:
        raise InvalidSpecError(f"replicas must be >= 100, got {replicas}")
    if c <= 0:
        b = beta(shape)
        d = np.ones(replicas)
        return BetaStarReport(BetaEstimate(b.mean, b.half_width, replicas), 0, replicas, d,
                              np.full(replicas, b.mean / shape.mass))
    rows = replica_map(partial(_gs_row, c=c, shape=shape, W=W, eps_min=eps_min, pitch=pitch,
                               seed=seed), replicas, threads)
    area = np.array([r[0] for r in rows])
    diam = np.array([r[1] for r in rows])
    trunc = np.array([r[2] for r in rows])
    ok = ~trunc
    if trunc.mean() > 0.10:
        raise WindowTooSmallError(
            f"{trunc.sum()} of {replicas} gamma-star samples were truncated; widen W")
    m, hw = mean_ci(area[ok])
    est = BetaEstimate(shape.mass * m, shape.mass * hw, int(ok.sum()))
    return BetaStarReport(est, int(trunc.sum()), replicas, diam[ok], area[ok])


def estimate_beta_star(c, shape, W, eps_min, pitch, replicas, seed, threads=1) -> BetaEstimate:
    """Mean filled area of non-truncated gamma-star samples, times the mass."""
    return beta_star_run(c, shape, W, eps_min, pitch, replicas, seed, threads).estimate
