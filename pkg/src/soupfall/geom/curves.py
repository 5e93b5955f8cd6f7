"""Planar curve types and their metric helpers.

Points are plain ``(x, y)`` float tuples. Curves are frozen dataclasses, so they
are hashable and safe to share between workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.distance import pdist

from ..exceptions import GeometryError, InvalidScaleError

Point = tuple[float, float]

STEP_VECTORS = {"E": (1, 0), "N": (0, 1), "W": (-1, 0), "S": (0, -1)}
_VECTOR_STEPS = {v: k for k, v in STEP_VECTORS.items()}


def _point(p) -> Point:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise GeometryError(f"non-finite point {p!r}")
    return (x, y)


@dataclass(frozen=True)
class Circle:
    center: Point
    diam: float

    def __post_init__(self):
        object.__setattr__(self, "center", _point(self.center))
        object.__setattr__(self, "diam", float(self.diam))
        if not (self.diam > 0 and math.isfinite(self.diam)):
            raise GeometryError(f"circle diameter must be positive, got {self.diam}")

    @property
    def radius(self) -> float:
        return 0.5 * self.diam


@dataclass(frozen=True)
class Stick:
    a: Point
    b: Point

    def __post_init__(self):
        object.__setattr__(self, "a", _point(self.a))
        object.__setattr__(self, "b", _point(self.b))
        if self.a == self.b:
            raise GeometryError("stick endpoints must be distinct")


@dataclass(frozen=True)
class PolyLoop:
    """Closed polygonal loop; the last vertex connects back to the first."""

    vertices: tuple[Point, ...]

    def __post_init__(self):
        verts = tuple(_point(v) for v in self.vertices)
        if len(verts) < 3:
            raise GeometryError("a PolyLoop needs at least 3 vertices")
        object.__setattr__(self, "vertices", verts)

    def vertex_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)


@dataclass(frozen=True)
class LatticeLoop:
    """Closed nearest-neighbour walk on the square lattice.

    Vertex ``k`` sits at ``shift + mesh * (origin + sum(steps[:k]))``. ``shift``
    is zero for loops sampled on the lattice and becomes non-zero once a loop
    is translated by a non-lattice vector.
    """

    origin: tuple[int, int]
    steps: str
    mesh: float = 1.0
    shift: Point = field(default=(0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))
        object.__setattr__(self, "shift", _point(self.shift))
        object.__setattr__(self, "mesh", float(self.mesh))
        steps = str(self.steps).upper()
        object.__setattr__(self, "steps", steps)
        if not (self.mesh > 0 and math.isfinite(self.mesh)):
            raise GeometryError(f"mesh must be positive, got {self.mesh}")
        if not steps or any(s not in STEP_VECTORS for s in steps):
            raise GeometryError("steps must be a non-empty string over E, N, W, S")
        dx = steps.count("E") - steps.count("W")
        dy = steps.count("N") - steps.count("S")
        if dx or dy:
            raise GeometryError("lattice loop steps do not return to the origin")

    def walk(self) -> np.ndarray:
        """Integer vertex positions, shape ``(len(steps) + 1, 2)``; first == last."""
        return _walk(self.origin, self.steps)

    def vertex_array(self) -> np.ndarray:
        return np.asarray(self.shift) + self.mesh * self.walk()[:-1]


@lru_cache(maxsize=4096)
def _walk(origin, steps) -> np.ndarray:
    moves = np.array([STEP_VECTORS[s] for s in steps], dtype=np.int64)
    w = np.empty((len(steps) + 1, 2), dtype=np.int64)
    w[0] = origin
    np.cumsum(moves, axis=0, out=w[1:])
    w[1:] += np.asarray(origin)
    w.flags.writeable = False
    return w


def steps_from_moves(moves) -> str:
    return "".join(_VECTOR_STEPS[(int(dx), int(dy))] for dx, dy in moves)


Curve = Union[Circle, Stick, PolyLoop, LatticeLoop]


def polyline(curve: Curve) -> np.ndarray:
    """Vertices of a piecewise-linear curve as an ``(n, 2)`` array (open list)."""
    if isinstance(curve, Stick):
        return np.array([curve.a, curve.b])
    if isinstance(curve, (PolyLoop, LatticeLoop)):
        return curve.vertex_array()
    raise TypeError(f"{type(curve).__name__} is not piecewise linear")


def segments(curve: Curve) -> np.ndarray:
    """Edges as an ``(m, 4)`` array of ``x0, y0, x1, y1``."""
    if isinstance(curve, Stick):
        return np.array([[*curve.a, *curve.b]])
    v = polyline(curve)
    w = np.roll(v, -1, axis=0)
    return np.hstack([v, w])


def _max_pairwise(pts: np.ndarray) -> float:
    pts = np.unique(pts, axis=0)
    if len(pts) < 2:
        return 0.0
    if len(pts) > 64:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except Exception:  # collinear input, qhull refuses
            pass
    return float(pdist(pts).max())


def diameter(curve: Curve) -> float:
    if isinstance(curve, Circle):
        return curve.diam
    if isinstance(curve, Stick):
        return math.dist(curve.a, curve.b)
    if isinstance(curve, LatticeLoop):
        return curve.mesh * _max_pairwise(curve.walk().astype(float))
    return _max_pairwise(curve.vertex_array())


def _lexmin(pts: np.ndarray) -> Point:
    i = np.lexsort((pts[:, 1], pts[:, 0]))[0]
    return (float(pts[i, 0]), float(pts[i, 1]))


def anchor(curve: Curve) -> Point:
    """Leftmost point of the curve, ties broken by the smallest y."""
    if isinstance(curve, Circle):
        return (curve.center[0] - curve.radius, curve.center[1])
    if isinstance(curve, Stick):
        return min(curve.a, curve.b)
    if isinstance(curve, LatticeLoop):
        i, j = _lexmin(curve.walk().astype(float))
        return (curve.shift[0] + curve.mesh * i, curve.shift[1] + curve.mesh * j)
    return _lexmin(curve.vertex_array())


def bbox(curve: Curve) -> tuple[float, float, float, float]:
    if isinstance(curve, Circle):
        (x, y), r = curve.center, curve.radius
        return (x - r, y - r, x + r, y + r)
    v = polyline(curve)
    lo, hi = v.min(axis=0), v.max(axis=0)
    return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def length(curve: Curve) -> float:
    if isinstance(curve, Circle):
        return math.pi * curve.diam
    if isinstance(curve, LatticeLoop):
        return curve.mesh * len(curve.steps)
    s = segments(curve)
    return float(np.hypot(s[:, 2] - s[:, 0], s[:, 3] - s[:, 1]).sum())


def place(curve: Curve, z: Point, rho: float) -> Curve:
    """Affine image ``z + rho * curve``."""
    rho = float(rho)
    if not (rho > 0 and math.isfinite(rho)):
        raise InvalidScaleError(f"scale must be positive, got {rho}")
    zx, zy = _point(z)
    if isinstance(curve, Circle):
        cx, cy = curve.center
        return Circle((zx + rho * cx, zy + rho * cy), rho * curve.diam)
    if isinstance(curve, Stick):
        return Stick((zx + rho * curve.a[0], zy + rho * curve.a[1]),
                     (zx + rho * curve.b[0], zy + rho * curve.b[1]))
    if isinstance(curve, LatticeLoop):
        sx, sy = curve.shift
        return LatticeLoop(curve.origin, curve.steps, rho * curve.mesh,
                           (zx + rho * sx, zy + rho * sy))
    return PolyLoop(tuple((zx + rho * x, zy + rho * y) for x, y in curve.vertices))


def normalize(curve: Curve) -> Curve:
    """Rescale to unit diameter and move the anchor to the origin."""
    d = diameter(curve)
    ax, ay = anchor(curve)
    return place(place(curve, (-ax, -ay), 1.0), (0.0, 0.0), 1.0 / d)


# -- JSON records -----------------------------------------------------------

def to_record(curve: Curve) -> dict:
    if isinstance(curve, Circle):
        return {"kind": "circle", "center": list(curve.center), "diam": curve.diam}
    if isinstance(curve, Stick):
        return {"kind": "stick", "a": list(curve.a), "b": list(curve.b)}
    if isinstance(curve, PolyLoop):
        return {"kind": "polyloop", "v": [list(p) for p in curve.vertices]}
    rec = {"kind": "lattice", "origin": list(curve.origin), "steps": curve.steps,
           "mesh": curve.mesh}
    if curve.shift != (0.0, 0.0):
        rec["shift"] = list(curve.shift)
    return rec


def from_record(rec: dict) -> Curve:
    try:
        kind = rec["kind"]
        if kind == "circle":
            return Circle(tuple(rec["center"]), rec["diam"])
        if kind == "stick":
            return Stick(tuple(rec["a"]), tuple(rec["b"]))
        if kind == "polyloop":
            return PolyLoop(tuple(tuple(p) for p in rec["v"]))
        if kind == "lattice":
            return LatticeLoop(tuple(rec["origin"]), rec["steps"], rec["mesh"],
                               tuple(rec.get("shift", (0.0, 0.0))))
    except (KeyError, TypeError, IndexError) as exc:
        raise GeometryError(f"malformed curve record: {exc}") from exc
    raise GeometryError(f"unknown curve kind {rec.get('kind')!r}")
