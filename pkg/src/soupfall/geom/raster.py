"""Cell rasters: interiors, curve traces, flood fills and area estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..exceptions import GeometryError, ResolutionError
from .arrays import as_curve_array
from .curves import Circle, Curve, Point, Stick, length, segments
from .predicates import contains_points, distance_to

FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True, eq=False)
class Raster:
    """Boolean grid; cell ``(i, j)`` covers ``[x0 + i p, x0 + (i+1) p) x [y0 + j p, ...)``."""

    origin: Point
    pitch: float
    nx: int
    ny: int
    occupied: np.ndarray

    def __post_init__(self):
        if not self.pitch > 0:
            raise ResolutionError(f"pitch must be positive, got {self.pitch}")
        if self.nx < 1 or self.ny < 1:
            raise GeometryError("raster needs at least one cell per axis")
        occ = np.asarray(self.occupied, dtype=bool)
        if occ.shape != (self.nx, self.ny):
            raise GeometryError(f"occupied grid has shape {occ.shape}, expected {(self.nx, self.ny)}")
        object.__setattr__(self, "occupied", occ)

    @classmethod
    def blank(cls, bbox, pitch: float) -> "Raster":
        nx, ny = grid_shape(bbox, pitch)
        return cls((float(bbox[0]), float(bbox[1])), float(pitch), nx, ny,
                   np.zeros((nx, ny), dtype=bool))

    def xs(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.nx) + 0.5) * self.pitch

    def ys(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.ny) + 0.5) * self.pitch

    def centers(self) -> np.ndarray:
        X, Y = np.meshgrid(self.xs(), self.ys(), indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def count(self) -> int:
        return int(self.occupied.sum())

    def area(self) -> float:
        return self.count() * self.pitch ** 2

    def __eq__(self, other) -> bool:
        if not isinstance(other, Raster):
            return NotImplemented
        return (self.origin == other.origin and self.pitch == other.pitch
                and self.occupied.shape == other.occupied.shape
                and bool(np.array_equal(self.occupied, other.occupied)))

    # PGM rows run top to bottom, so y is flipped on export
    def to_pgm(self) -> bytes:
        img = np.where(self.occupied.T[::-1], 255, 0).astype(np.uint8)
        return b"P5\n%d %d\n255\n" % (self.nx, self.ny) + img.tobytes()

    def write_pgm(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_pgm())

    @classmethod
    def from_pgm(cls, data: bytes, origin: Point = (0.0, 0.0), pitch: float = 1.0) -> "Raster":
        parts = data.split(maxsplit=4)
        if len(parts) < 5 or parts[0] != b"P5":
            raise GeometryError("not a binary PGM (P5) image")
        nx, ny, maxval = int(parts[1]), int(parts[2]), int(parts[3])
        if maxval > 255:
            raise GeometryError("only 8-bit PGM images are supported")
        img = np.frombuffer(parts[4][: nx * ny], dtype=np.uint8)
        if img.size != nx * ny:
            raise GeometryError("PGM pixel data is truncated")
        occ = img.reshape(ny, nx)[::-1].T > 0
        return cls(origin, pitch, nx, ny, occ)


def grid_shape(bbox, pitch: float) -> tuple[int, int]:
    if not pitch > 0:
        raise ResolutionError(f"pitch must be positive, got {pitch}")
    x0, y0, x1, y1 = bbox
    if not all(map(math.isfinite, bbox)):
        raise GeometryError("raster window must be bounded")
    nx = max(1, int(math.ceil((x1 - x0) / pitch - 1e-9)))
    ny = max(1, int(math.ceil((y1 - y0) / pitch - 1e-9)))
    return nx, ny


# -- low level marking --------------------------------------------------------

def _mark_circle_interiors(occ, origin, pitch, xy, r) -> None:
    """Set cells whose centre lies strictly inside any of the circles."""
    if len(r) == 0:
        return
    nx, ny = occ.shape
    ox, oy = origin
    # rows whose centre line meets the open disc
    j0 = np.floor((xy[:, 1] - r - oy) / pitch - 0.5).astype(np.int64) + 1
    j1 = np.ceil((xy[:, 1] + r - oy) / pitch - 0.5).astype(np.int64) - 1
    j0 = np.maximum(j0, 0)
    j1 = np.minimum(j1, ny - 1)
    nrow = np.maximum(j1 - j0 + 1, 0)
    keep = nrow > 0
    if not keep.any():
        return
    xy, r, j0, nrow = xy[keep], r[keep], j0[keep], nrow[keep]
    diff = np.zeros((nx + 1, ny), dtype=np.int32)
    step = 1 << 22
    starts = np.concatenate([[0], np.cumsum(nrow)])
    k = 0
    while k < len(r):
        # chunk so the exploded row list stays bounded
        hi = int(np.searchsorted(starts, starts[k] + step, side="right")) - 1
        hi = max(hi, k + 1)
        sl = slice(k, hi)
        cnt = nrow[sl]
        item = np.repeat(np.arange(hi - k), cnt)
        off = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        j = j0[sl][item] + off
        dy = oy + (j + 0.5) * pitch - xy[sl, 1][item]
        w2 = r[sl][item] ** 2 - dy * dy
        ok = w2 > 0
        w = np.sqrt(np.where(ok, w2, 0.0))
        cx = xy[sl, 0][item]
        ilo = np.floor((cx - w - ox) / pitch - 0.5).astype(np.int64) + 1
        ihi = np.ceil((cx + w - ox) / pitch - 0.5).astype(np.int64) - 1
        ilo = np.maximum(ilo, 0)
        ihi = np.minimum(ihi, nx - 1)
        ok &= ihi >= ilo
        np.add.at(diff, (ilo[ok], j[ok]), 1)
        np.add.at(diff, (ihi[ok] + 1, j[ok]), -1)
        k = hi
    occ |= np.cumsum(diff, axis=0)[:nx] > 0


def _mark_points(occ, origin, pitch, pts) -> None:
    i = np.floor((pts[:, 0] - origin[0]) / pitch).astype(np.int64)
    j = np.floor((pts[:, 1] - origin[1]) / pitch).astype(np.int64)
    ok = (i >= 0) & (i < occ.shape[0]) & (j >= 0) & (j < occ.shape[1])
    occ[i[ok], j[ok]] = True


def _mark_segments(occ, origin, pitch, segs) -> None:
    """Set every cell met by a densely sampled point of each segment.

    Samples are at most pitch/2 apart, so the marked cells of one segment
    form an 8-connected chain that a 4-connected fill cannot slip through.
    """
    if len(segs) == 0:
        return
    a, b = segs[:, :2], segs[:, 2:]
    n = np.ceil(np.hypot(*(b - a).T) / (0.5 * pitch)).astype(np.int64) + 1
    tot = int(n.sum())
    step = 1 << 22
    starts = np.concatenate([[0], np.cumsum(n)])
    k = 0
    while k < len(n):
        hi = max(int(np.searchsorted(starts, starts[k] + step, side="right")) - 1, k + 1)
        cnt = n[k:hi]
        item = np.repeat(np.arange(hi - k), cnt)
        off = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
        t = off / np.maximum(cnt[item] - 1, 1)
        pts = a[k:hi][item] + t[:, None] * (b[k:hi][item] - a[k:hi][item])
        _mark_points(occ, origin, pitch, pts)
        k = hi
    del tot


def _mark_circle_traces(occ, origin, pitch, xy, r) -> None:
    """Set every cell whose closed square meets one of the circles."""
    nx, ny = occ.shape
    ox, oy = origin
    for (cx, cy), rr in zip(xy, r):
        i0 = max(int(math.floor((cx - rr - ox) / pitch)) - 1, 0)
        i1 = min(int(math.floor((cx + rr - ox) / pitch)) + 1, nx - 1)
        j0 = max(int(math.floor((cy - rr - oy) / pitch)) - 1, 0)
        j1 = min(int(math.floor((cy + rr - oy) / pitch)) + 1, ny - 1)
        if i1 < i0 or j1 < j0:
            continue
        xl = ox + np.arange(i0, i1 + 1) * pitch - cx
        yl = oy + np.arange(j0, j1 + 1) * pitch - cy
        xh, yh = xl + pitch, yl + pitch
        nxd = np.where(xl > 0, xl, np.where(xh < 0, -xh, 0.0))
        nyd = np.where(yl > 0, yl, np.where(yh < 0, -yh, 0.0))
        fxd = np.maximum(np.abs(xl), np.abs(xh))
        fyd = np.maximum(np.abs(yl), np.abs(yh))
        near = nxd[:, None] ** 2 + nyd[None, :] ** 2
        far = fxd[:, None] ** 2 + fyd[None, :] ** 2
        occ[i0:i1 + 1, j0:j1 + 1] |= (near <= rr * rr) & (far >= rr * rr)


def _mark_generic_interiors(occ, origin, pitch, curves) -> None:
    nx, ny = occ.shape
    ox, oy = origin
    for c in curves:
        if isinstance(c, Stick):
            continue
        x0, y0, x1, y1 = as_curve_array([c]).bboxes()[0]
        i0 = max(int(math.floor((x0 - ox) / pitch - 0.5)), 0)
        i1 = min(int(math.ceil((x1 - ox) / pitch - 0.5)), nx - 1)
        j0 = max(int(math.floor((y0 - oy) / pitch - 0.5)), 0)
        j1 = min(int(math.ceil((y1 - oy) / pitch - 0.5)), ny - 1)
        if i1 < i0 or j1 < j0:
            continue
        X, Y = np.meshgrid(ox + (np.arange(i0, i1 + 1) + 0.5) * pitch,
                           oy + (np.arange(j0, j1 + 1) + 0.5) * pitch, indexing="ij")
        inside = contains_points(c, np.column_stack([X.ravel(), Y.ravel()]))
        occ[i0:i1 + 1, j0:j1 + 1] |= inside.reshape(X.shape)


def mark_interiors(occ, origin, pitch, curves) -> None:
    """In place: set cells whose centre lies in the interior of some curve."""
    arr = as_curve_array(curves)
    if arr.kind == "circle":
        _mark_circle_interiors(occ, origin, pitch, arr.xy, arr.r)
    elif arr.kind == "mixed":
        circ = [c for c in arr.items if isinstance(c, Circle)]
        rest = [c for c in arr.items if not isinstance(c, (Circle, Stick))]
        if circ:
            _mark_circle_interiors(occ, origin, pitch, np.array([c.center for c in circ]),
                                   np.array([c.radius for c in circ]))
        _mark_generic_interiors(occ, origin, pitch, rest)


def mark_traces(occ, origin, pitch, curves) -> None:
    """In place: set cells met by the curves themselves."""
    arr = as_curve_array(curves)
    if arr.kind == "circle":
        _mark_circle_traces(occ, origin, pitch, arr.xy, arr.r)
    elif arr.kind == "stick":
        _mark_segments(occ, origin, pitch, np.hstack([arr.a, arr.b]))
    else:
        circ = [c for c in arr.items if isinstance(c, Circle)]
        if circ:
            _mark_circle_traces(occ, origin, pitch, np.array([c.center for c in circ]),
                                np.array([c.radius for c in circ]))
        segs = [segments(c) for c in arr.items if not isinstance(c, Circle)]
        if segs:
            _mark_segments(occ, origin, pitch, np.vstack(segs))


def mark_sticks(occ, origin, pitch, curves) -> None:
    """In place: set cells met by the stick members of ``curves``."""
    arr = as_curve_array(curves)
    if arr.kind == "stick":
        _mark_segments(occ, origin, pitch, np.hstack([arr.a, arr.b]))
    elif arr.kind == "mixed":
        segs = [segments(c) for c in arr.items if isinstance(c, Stick)]
        if segs:
            _mark_segments(occ, origin, pitch, np.vstack(segs))


# -- public operations -----------------------------------------------------

def rasterize_interiors(curves, window, pitch: float) -> Raster:
    """Raster over ``window``'s bounding box; a cell is occupied iff its centre
    lies in the interior of at least one curve."""
    ras = Raster.blank(window.bbox(), pitch)
    occ = ras.occupied.copy()
    mark_interiors(occ, ras.origin, pitch, curves)
    return Raster(ras.origin, ras.pitch, ras.nx, ras.ny, occ)


def exterior_mask(blocked: np.ndarray) -> np.ndarray:
    """Free cells 4-connected to the grid border."""
    labels, _ = ndimage.label(~blocked, structure=FOUR)
    edge = np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
    ids = np.unique(edge[edge > 0])
    return np.isin(labels, ids)


def filled_area(curves, pitch: float) -> float:
    """Area enclosed by a set of curves: everything not reachable from far away.

    The curves are traced on a grid whose border lies at least two cells
    outside their bounding box; the exterior is flood-filled (4-connectivity)
    from the border and all remaining cells are counted.
    """
    if not pitch > 0:
        raise ResolutionError(f"pitch must be positive, got {pitch}")
    arr = as_curve_array(curves)
    if len(arr) == 0:
        return 0.0
    bb = arr.bboxes()
    lo = bb[:, :2].min(0)
    hi = bb[:, 2:].max(0)
    pad = 2
    # half-cell offset puts axis-aligned edges on cell centres
    origin = (lo[0] - (pad + 0.5) * pitch, lo[1] - (pad + 0.5) * pitch)
    nx = int(math.ceil((hi[0] - origin[0]) / pitch)) + pad + 1
    ny = int(math.ceil((hi[1] - origin[1]) / pitch)) + pad + 1
    if nx * ny > 2e8:
        raise ResolutionError(f"grid of {nx}x{ny} cells is too large; raise the pitch")
    occ = np.zeros((nx, ny), dtype=bool)
    mark_traces(occ, origin, pitch, arr)
    ext = exterior_mask(occ)
    return float((~ext).sum()) * pitch * pitch


def neighborhood_area(curve: Curve, r: float, pitch: float | None = None) -> float:
    """Area of ``{z : d(z, curve) <= r}``.

    Closed forms for circles and sticks; otherwise cell centres on a grid of
    the given pitch are tested against the exact distance.
    """
    if not r > 0:
        raise GeometryError(f"neighbourhood radius must be positive, got {r}")
    if isinstance(curve, Circle):
        R = curve.radius
        return math.pi * ((R + r) ** 2 - max(R - r, 0.0) ** 2)
    if isinstance(curve, Stick):
        return 2.0 * r * length(curve) + math.pi * r * r
    if pitch is None:
        raise ResolutionError("a pitch is needed for this curve type")
    x0, y0, x1, y1 = as_curve_array([curve]).bboxes()[0]
    ras = Raster.blank((x0 - r, y0 - r, x1 + r, y1 + r), pitch)
    d = distance_to(curve, ras.centers())
    return float((d <= r).sum()) * pitch * pitch


def coarsen(occ: np.ndarray, k: int) -> np.ndarray:
    """Block-OR of a boolean grid by a factor ``k`` (edges padded with False)."""
    nx, ny = occ.shape
    px, py = -nx % k, -ny % k
    if px or py:
        occ = np.pad(occ, ((0, px), (0, py)))
    return occ.reshape(occ.shape[0] // k, k, occ.shape[1] // k, k).any(axis=(1, 3))
