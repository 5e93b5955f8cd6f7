"""Interiors, distances and the crossing relation between curves."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .curves import Circle, Curve, LatticeLoop, Stick, segments

_TOL = 1e-12


# -- lattice fillings -------------------------------------------------------

@lru_cache(maxsize=4096)
def lattice_filling(loop: LatticeLoop) -> tuple[int, int, np.ndarray]:
    """Filled faces of a lattice loop in lattice units.

    Returns ``(i0, j0, filled)`` where ``filled[a, b]`` says whether the unit
    face ``[i0 + a, i0 + a + 1] x [j0 + b, j0 + b + 1]`` lies in a bounded
    component of the complement of the walk. Works on a doubled grid where
    faces, edges and vertices each get a cell; walk edges and all vertices
    are walls.
    """
    w = loop.walk()
    lo = w.min(axis=0) - 1
    hi = w.max(axis=0) + 1
    shape = 2 * (hi - lo) + 1
    free = np.ones(shape, dtype=bool)
    free[::2, ::2] = False
    d = 2 * (w - lo)
    mids = (d[:-1] + d[1:]) // 2
    free[mids[:, 0], mids[:, 1]] = False
    labels, _ = ndimage.label(free)
    outside = labels[1, 1]
    faces = labels[1::2, 1::2]
    filled = faces != outside
    filled.flags.writeable = False
    return int(lo[0]), int(lo[1]), filled


def lattice_filled_count(loop: LatticeLoop) -> int:
    return int(lattice_filling(loop)[2].sum())


def _lattice_edge_sets(loop: LatticeLoop):
    w = loop.walk()
    a, b = w[:-1], w[1:]
    lo = np.minimum(a, b)
    horiz = a[:, 1] == b[:, 1]
    h = {(int(x), int(y)) for x, y in lo[horiz]}
    v = {(int(x), int(y)) for x, y in lo[~horiz]}
    return h, v


def _lattice_contains(loop: LatticeLoop, pts: np.ndarray) -> np.ndarray:
    q = (pts - np.asarray(loop.shift)) / loop.mesh
    i0, j0, filled = lattice_filling(loop)
    fi = np.floor(q[:, 0]).astype(np.int64) - i0
    fj = np.floor(q[:, 1]).astype(np.int64) - j0
    ok = (fi >= 0) & (fi < filled.shape[0]) & (fj >= 0) & (fj < filled.shape[1])
    out = np.zeros(len(q), dtype=bool)
    out[ok] = filled[fi[ok], fj[ok]]
    # points lying on the walk itself are not interior
    rx, ry = np.round(q[:, 0]), np.round(q[:, 1])
    on_x = np.abs(q[:, 0] - rx) < 1e-9
    on_y = np.abs(q[:, 1] - ry) < 1e-9
    cand = np.flatnonzero(out & (on_x | on_y))
    if len(cand):
        h, v = _lattice_edge_sets(loop)
        for k in cand:
            x, y = q[k]
            if on_y[k] and (math.floor(x), int(ry[k])) in h:
                out[k] = False
            elif on_y[k] and on_x[k] and (int(rx[k]) - 1, int(ry[k])) in h:
                out[k] = False
            elif on_x[k] and ((int(rx[k]), math.floor(y)) in v
                              or (on_y[k] and (int(rx[k]), int(ry[k]) - 1) in v)):
                out[k] = False
    return out


# -- point/segment helpers --------------------------------------------------

def point_segment_distance(pts: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Distance from every point to every segment, shape ``(n_pts, n_segs)``."""
    p = pts[:, None, :]
    a = segs[None, :, :2]
    d = segs[None, :, 2:] - a
    dd = np.maximum((d * d).sum(-1), 1e-300)
    t = np.clip(((p - a) * d).sum(-1) / dd, 0.0, 1.0)
    proj = a + t[..., None] * d
    return np.sqrt(((p - proj) ** 2).sum(-1))


def _winding(pts: np.ndarray, verts: np.ndarray) -> np.ndarray:
    x, y = pts[:, 0:1], pts[:, 1:2]
    x0, y0 = verts[None, :, 0], verts[None, :, 1]
    v1 = np.roll(verts, -1, axis=0)
    x1, y1 = v1[None, :, 0], v1[None, :, 1]
    left = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
    up = (y0 <= y) & (y1 > y) & (left > 0)
    down = (y0 > y) & (y1 <= y) & (left < 0)
    return up.sum(axis=1) - down.sum(axis=1)


def contains_points(curve: Curve, pts) -> np.ndarray:
    """Vectorised :func:`interior_contains` over an ``(n, 2)`` array of points."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if isinstance(curve, Circle):
        d2 = ((pts - np.asarray(curve.center)) ** 2).sum(axis=1)
        return d2 < curve.radius ** 2
    if isinstance(curve, Stick):
        return np.zeros(len(pts), dtype=bool)
    if isinstance(curve, LatticeLoop):
        return _lattice_contains(curve, pts)
    verts = curve.vertex_array()
    inside = np.zeros(len(pts), dtype=bool)
    for s in range(0, len(pts), 4096):
        chunk = pts[s:s + 4096]
        w = _winding(chunk, verts) != 0
        if w.any():
            w &= point_segment_distance(chunk, segments(curve)).min(axis=1) > _TOL
        inside[s:s + 4096] = w
    return inside


def interior_contains(curve: Curve, p) -> bool:
    """Whether ``p`` lies in the filled interior of ``curve`` (and off the curve).

    Sticks have empty interiors. For lattice loops the interior is the
    filling: every bounded component of the complement of the walk.
    Polygonal loops use the non-zero winding rule.
    """
    return bool(contains_points(curve, np.asarray([p], dtype=float))[0])


def distance_to(curve: Curve, pts) -> np.ndarray:
    """Euclidean distance from each point to the curve (as a set)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if isinstance(curve, Circle):
        d = np.sqrt(((pts - np.asarray(curve.center)) ** 2).sum(axis=1))
        return np.abs(d - curve.radius)
    segs = segments(curve)
    out = np.empty(len(pts))
    for s in range(0, len(pts), 2048):
        out[s:s + 2048] = point_segment_distance(pts[s:s + 2048], segs).min(axis=1)
    return out


# -- segment intersections ---------------------------------------------------

def _cross2(ax, ay, bx, by):
    return ax * by - ay * bx


def segment_params(seg: np.ndarray, others: np.ndarray) -> np.ndarray:
    """Parameters ``t`` in [0, 1] where ``seg`` meets any of ``others``."""
    p = seg[:2]
    r = seg[2:] - p
    q = others[:, :2]
    s = others[:, 2:] - q
    denom = _cross2(r[0], r[1], s[:, 0], s[:, 1])
    qp = q - p
    ts = []
    nz = np.abs(denom) > _TOL * (np.hypot(*r) * np.hypot(s[:, 0], s[:, 1]) + _TOL)
    if nz.any():
        t = _cross2(qp[nz, 0], qp[nz, 1], s[nz, 0], s[nz, 1]) / denom[nz]
        u = _cross2(qp[nz, 0], qp[nz, 1], r[0], r[1]) / denom[nz]
        ok = (t >= -_TOL) & (t <= 1 + _TOL) & (u >= -_TOL) & (u <= 1 + _TOL)
        ts.append(np.clip(t[ok], 0, 1))
    par = ~nz
    if par.any():
        # collinear overlaps contribute the projected endpoints of the other segment
        rr = max(float(r @ r), 1e-300)
        coll = np.abs(_cross2(qp[par, 0], qp[par, 1], r[0], r[1])) <= _TOL * (rr + 1.0)
        if coll.any():
            qo = q[par][coll]
            eo = (others[par][coll])[:, 2:]
            for e in (qo, eo):
                t = ((e - p) @ r) / rr
                ts.append(t[(t >= 0) & (t <= 1)])
    return np.concatenate(ts) if ts else np.empty(0)


def segments_intersect(s1: np.ndarray, s2: np.ndarray) -> bool:
    return len(segment_params(np.asarray(s1, float), np.atleast_2d(np.asarray(s2, float)))) > 0


def _circle_segment_angles(c: Circle, segs: np.ndarray) -> np.ndarray:
    cx, cy = c.center
    r = c.radius
    p = segs[:, :2] - (cx, cy)
    d = segs[:, 2:] - segs[:, :2]
    a = (d * d).sum(1)
    b = 2 * (p * d).sum(1)
    cc = (p * p).sum(1) - r * r
    disc = b * b - 4 * a * cc
    ok = (disc >= 0) & (a > 0)
    angles = []
    if ok.any():
        sq = np.sqrt(disc[ok])
        for sign in (-1.0, 1.0):
            t = (-b[ok] + sign * sq) / (2 * a[ok])
            m = (t >= 0) & (t <= 1)
            pt = p[ok][m] + t[m, None] * d[ok][m]
            angles.append(np.arctan2(pt[:, 1], pt[:, 0]))
    return np.concatenate(angles) if angles else np.empty(0)


def _pieces_meet(curve: Curve, target: Curve) -> bool:
    """Whether ``curve`` meets int(target) where target is a polygonal loop."""
    tsegs = segments(target)
    if isinstance(curve, Circle):
        ang = np.sort(_circle_segment_angles(curve, tsegs))
        if len(ang) == 0:
            probe = np.array([0.0])
        else:
            nxt = np.append(ang[1:], ang[0] + 2 * np.pi)
            probe = 0.5 * (ang + nxt)
        pts = np.column_stack([np.cos(probe), np.sin(probe)]) * curve.radius + curve.center
        return bool(contains_points(target, pts).any())
    probes = []
    for seg in segments(curve):
        t = np.unique(np.concatenate([[0.0, 1.0], segment_params(seg, tsegs)]))
        mid = 0.5 * (t[:-1] + t[1:])
        mid = mid[np.diff(t) > _TOL]
        probes.append(seg[:2] + mid[:, None] * (seg[2:] - seg[:2]))
    pts = np.vstack(probes) if probes else np.empty((0, 2))
    return bool(len(pts) and contains_points(target, pts).any())


def meets_interior(a: Curve, b: Curve) -> bool:
    """Whether the curve ``a`` intersects the interior of ``b``."""
    if isinstance(b, Stick):
        return False
    if isinstance(b, Circle):
        r = b.radius
        if isinstance(a, Circle):
            d = math.dist(a.center, b.center)
            return abs(d - a.radius) < r
        return bool(point_segment_distance(np.asarray([b.center]), segments(a)).min() < r)
    return _pieces_meet(a, b)


def curves_cross(a: Curve, b: Curve) -> bool:
    """Crossing relation used to build clusters.

    Two loops cross when each meets the interior of the other. Two sticks
    cross when the segments intersect; a stick and a loop cross when the
    stick meets the loop's interior.
    """
    if a is b:
        return False
    sa, sb = isinstance(a, Stick), isinstance(b, Stick)
    if sa and sb:
        return segments_intersect(segments(a)[0], segments(b))
    if sa:
        return meets_interior(a, b)
    if sb:
        return meets_interior(b, a)
    if isinstance(a, Circle) and isinstance(b, Circle):
        d = math.dist(a.center, b.center)
        return abs(a.radius - b.radius) < d < a.radius + b.radius
    return meets_interior(a, b) and meets_interior(b, a)
