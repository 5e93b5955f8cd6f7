"""Struct-of-arrays container for many curves of one kind."""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .curves import Circle, Stick, bbox, diameter


class CurveArray(Sequence):
    """An immutable list of curves stored column-wise when possible.

    ``kind`` is ``"circle"`` (columns ``xy``, ``r``), ``"stick"`` (columns ``a``,
    ``b``) or ``"mixed"`` (a tuple of curve objects). Indexing with an int gives
    a curve object; indexing with an array or slice gives a new ``CurveArray``.
    """

    __slots__ = ("kind", "xy", "r", "a", "b", "items", "_diam")

    def __init__(self, kind, *, xy=None, r=None, a=None, b=None, items=None):
        self.kind = kind
        self.xy = self.r = self.a = self.b = self.items = None
        if kind == "circle":
            self.xy = np.asarray(xy, dtype=float).reshape(-1, 2)
            self.r = np.asarray(r, dtype=float).reshape(-1)
            self._diam = 2.0 * self.r
        elif kind == "stick":
            self.a = np.asarray(a, dtype=float).reshape(-1, 2)
            self.b = np.asarray(b, dtype=float).reshape(-1, 2)
            self._diam = np.hypot(*(self.b - self.a).T)
        elif kind == "mixed":
            self.items = tuple(items)
            self._diam = np.array([diameter(c) for c in self.items], dtype=float)
        else:
            raise ValueError(f"unknown curve array kind {kind!r}")
        for arr in (self.xy, self.r, self.a, self.b, self._diam):
            if arr is not None:
                arr.flags.writeable = False

    # -- construction ----------------------------------------------------

    @classmethod
    def empty(cls, kind="mixed") -> "CurveArray":
        if kind == "circle":
            return cls("circle", xy=np.empty((0, 2)), r=np.empty(0))
        if kind == "stick":
            return cls("stick", a=np.empty((0, 2)), b=np.empty((0, 2)))
        return cls("mixed", items=())

    @classmethod
    def from_curves(cls, curves) -> "CurveArray":
        curves = list(curves)
        if curves and all(isinstance(c, Circle) for c in curves):
            return cls("circle", xy=[c.center for c in curves], r=[c.radius for c in curves])
        if curves and all(isinstance(c, Stick) for c in curves):
            return cls("stick", a=[c.a for c in curves], b=[c.b for c in curves])
        return cls("mixed", items=curves)

    # -- sequence protocol -----------------------------------------------

    def __len__(self) -> int:
        return len(self._diam)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            i = int(idx)
            if self.kind == "circle":
                return Circle(tuple(self.xy[i]), 2.0 * self.r[i])
            if self.kind == "stick":
                return Stick(tuple(self.a[i]), tuple(self.b[i]))
            return self.items[i]
        return self.take(idx)

    def take(self, idx) -> "CurveArray":
        if isinstance(idx, slice):
            idx = np.arange(len(self))[idx]
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        if self.kind == "circle":
            return CurveArray("circle", xy=self.xy[idx], r=self.r[idx])
        if self.kind == "stick":
            return CurveArray("stick", a=self.a[idx], b=self.b[idx])
        return CurveArray("mixed", items=[self.items[i] for i in idx])

    def __eq__(self, other) -> bool:
        if not isinstance(other, CurveArray) or len(self) != len(other):
            return NotImplemented if not isinstance(other, CurveArray) else False
        if self.kind == other.kind == "circle":
            return bool(np.array_equal(self.xy, other.xy) and np.array_equal(self.r, other.r))
        if self.kind == other.kind == "stick":
            return bool(np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b))
        return list(self) == list(other)

    __hash__ = None

    def __repr__(self) -> str:
        return f"CurveArray(kind={self.kind!r}, n={len(self)})"

    # -- vectorised metrics --------------------------------------------------

    def diameters(self) -> np.ndarray:
        return self._diam

    def bboxes(self) -> np.ndarray:
        """Bounding boxes as an ``(n, 4)`` array ``x0, y0, x1, y1``."""
        if self.kind == "circle":
            r = self.r[:, None]
            return np.hstack([self.xy - r, self.xy + r])
        if self.kind == "stick":
            return np.hstack([np.minimum(self.a, self.b), np.maximum(self.a, self.b)])
        if not self.items:
            return np.empty((0, 4))
        return np.array([bbox(c) for c in self.items], dtype=float)

    def centers(self) -> np.ndarray:
        bb = self.bboxes()
        return 0.5 * (bb[:, :2] + bb[:, 2:])

    def concat(self, other: "CurveArray") -> "CurveArray":
        if not len(self):
            return other
        if not len(other):
            return self
        if self.kind == other.kind == "circle":
            return CurveArray("circle", xy=np.vstack([self.xy, other.xy]),
                              r=np.concatenate([self.r, other.r]))
        if self.kind == other.kind == "stick":
            return CurveArray("stick", a=np.vstack([self.a, other.a]),
                              b=np.vstack([self.b, other.b]))
        return CurveArray("mixed", items=list(self) + list(other))


def as_curve_array(curves) -> CurveArray:
    if isinstance(curves, CurveArray):
        return curves
    if isinstance(curves, (Circle, Stick)) or hasattr(curves, "steps") or hasattr(curves, "vertices"):
        curves = [curves]
    return CurveArray.from_curves(curves)
