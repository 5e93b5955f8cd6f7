"""Bounded planar domains: disks, rectangles and annuli."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..exceptions import GeometryError
from .curves import Circle, Curve, Point, _point, polyline, segments


@dataclass(frozen=True)
class Disk:
    center: Point = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", _point(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise GeometryError(f"disk radius must be positive, got {self.radius}")

    def bbox(self):
        (x, y), r = self.center, self.radius
        return (x - r, y - r, x + r, y + r)

    def area(self) -> float:
        return math.pi * self.radius ** 2

    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains_points(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return ((pts - self.center) ** 2).sum(1) < self.radius ** 2

    def contains_circles(self, xy, r) -> np.ndarray:
        d = np.hypot(xy[:, 0] - self.center[0], xy[:, 1] - self.center[1])
        return d + r < self.radius

    def contains_sticks(self, a, b) -> np.ndarray:
        return self.contains_points(a) & self.contains_points(b)

    def contains_curve(self, curve: Curve) -> bool:
        if isinstance(curve, Circle):
            return bool(self.contains_circles(np.asarray([curve.center]),
                                              np.asarray([curve.radius]))[0])
        return bool(self.contains_points(polyline(curve)).all())

    def to_record(self) -> dict:
        return {"kind": "disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class UnitDisk(Disk):
    """The disk of radius 1 around the origin."""

    def __init__(self):
        super().__init__((0.0, 0.0), 1.0)

    def to_record(self) -> dict:
        return {"kind": "unit_disk"}


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        for f in ("x0", "y0", "x1", "y1"):
            v = float(getattr(self, f))
            if not math.isfinite(v):
                raise GeometryError(f"rectangle bound {f} is not finite")
            object.__setattr__(self, f, v)
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise GeometryError("rectangle needs x0 < x1 and y0 < y1")

    @classmethod
    def square(cls, half_width: float, center: Point = (0.0, 0.0)) -> "Rect":
        cx, cy = center
        return cls(cx - half_width, cy - half_width, cx + half_width, cy + half_width)

    def bbox(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def diameter(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    def contains_points(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        return (x > self.x0) & (x < self.x1) & (y > self.y0) & (y < self.y1)

    def contains_circles(self, xy, r) -> np.ndarray:
        x, y = xy[:, 0], xy[:, 1]
        return ((x - r > self.x0) & (x + r < self.x1)
                & (y - r > self.y0) & (y + r < self.y1))

    def contains_sticks(self, a, b) -> np.ndarray:
        return self.contains_points(a) & self.contains_points(b)

    def contains_curve(self, curve: Curve) -> bool:
        if isinstance(curve, Circle):
            return bool(self.contains_circles(np.asarray([curve.center]),
                                              np.asarray([curve.radius]))[0])
        return bool(self.contains_points(polyline(curve)).all())

    def to_record(self) -> dict:
        return {"kind": "rect", "x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1}


@dataclass(frozen=True)
class Annulus:
    """Open ring ``r_in < |z - center| < r_out``."""

    center: Point = (0.0, 0.0)
    r_in: float = 0.5
    r_out: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", _point(self.center))
        object.__setattr__(self, "r_in", float(self.r_in))
        object.__setattr__(self, "r_out", float(self.r_out))
        if not (0 < self.r_in < self.r_out):
            raise GeometryError("annulus needs 0 < r_in < r_out")

    def bbox(self):
        (x, y), r = self.center, self.r_out
        return (x - r, y - r, x + r, y + r)

    def area(self) -> float:
        return math.pi * (self.r_out ** 2 - self.r_in ** 2)

    def diameter(self) -> float:
        return 2.0 * self.r_out

    def contains_points(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d2 = ((pts - self.center) ** 2).sum(1)
        return (d2 > self.r_in ** 2) & (d2 < self.r_out ** 2)

    def contains_circles(self, xy, r) -> np.ndarray:
        # a circle surrounding the hole stays inside as long as it avoids it
        d = np.hypot(xy[:, 0] - self.center[0], xy[:, 1] - self.center[1])
        return (np.abs(d - r) > self.r_in) & (d + r < self.r_out)

    def contains_sticks(self, a, b) -> np.ndarray:
        ok = self.contains_points(a) & self.contains_points(b)
        return ok & (_origin_segment_distance(a - self.center, b - self.center) > self.r_in)

    def contains_curve(self, curve: Curve) -> bool:
        from .predicates import point_segment_distance

        if isinstance(curve, Circle):
            return bool(self.contains_circles(np.asarray([curve.center]),
                                              np.asarray([curve.radius]))[0])
        if not self.contains_points(polyline(curve)).all():
            return False
        c = np.asarray([self.center])
        return bool(point_segment_distance(c, segments(curve)).min() > self.r_in)

    def to_record(self) -> dict:
        return {"kind": "annulus", "center": list(self.center),
                "r_in": self.r_in, "r_out": self.r_out}


def _origin_segment_distance(a, b) -> np.ndarray:
    d = b - a
    dd = np.maximum((d * d).sum(1), 1e-300)
    t = np.clip(-(a * d).sum(1) / dd, 0.0, 1.0)
    return np.hypot(a[:, 0] + t * d[:, 0], a[:, 1] + t * d[:, 1])


Domain = Disk | Rect | Annulus


def domain_from_record(rec) -> Domain:
    """Build a domain from a JSON record or a short string such as ``"unit_disk"``."""
    if isinstance(rec, str):
        rec = {"kind": rec}
    try:
        kind = rec["kind"]
        if kind == "unit_disk":
            return UnitDisk()
        if kind == "disk":
            return Disk(tuple(rec.get("center", (0.0, 0.0))), rec["radius"])
        if kind == "rect":
            return Rect(rec["x0"], rec["y0"], rec["x1"], rec["y1"])
        if kind == "unit_square":
            return Rect(0.0, 0.0, 1.0, 1.0)
        if kind == "annulus":
            return Annulus(tuple(rec.get("center", (0.0, 0.0))), rec["r_in"], rec["r_out"])
    except (KeyError, TypeError) as exc:
        raise GeometryError(f"malformed domain record: {exc}") from exc
    raise GeometryError(f"unknown domain kind {rec.get('kind')!r}")
