"""Shape measures and Poisson samplers for scale-invariant curve soups.

The intensity is ``c * d2z * drho / rho**3 * pi(dgamma)`` where ``pi`` lives on
curves of unit diameter anchored at the origin; a sampled curve is
``z + rho * gamma``. Sampling restricts to diameters in ``[eps_min, rho_max]``
and to curves contained in the domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, special

from .exceptions import InvalidSpecError
from .geom import (
    Circle,
    CurveArray,
    LatticeLoop,
    Stick,
    domain_from_record,
    filled_area,
    lattice_filled_count,
    neighborhood_area,
    normalize,
    place,
)
from .geom.domain import Domain
from .rng import stream

SHAPE_KINDS = ("circle", "stick", "discrete_stick", "rw_loop")

# substream tags under (seed, replica)
_TAG_COUNT, _TAG_SCALE, _TAG_POS, _TAG_SHAPE, _TAG_MARK = range(5)


@dataclass(frozen=True)
class ShapeMeasure:
    """Finite measure on unit-diameter curves anchored at the origin.

    ``n`` is the polygon vertex count for ``discrete_stick``; ``n_max`` is the
    half-length of the walks for ``rw_loop``.
    """

    kind: str = "circle"
    mass: float = 1.0
    n: int | None = None
    n_max: int | None = None

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise InvalidSpecError(f"shape.kind must be one of {SHAPE_KINDS}, got {self.kind!r}")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise InvalidSpecError(f"shape.mass must be positive, got {self.mass}")
        if self.kind == "discrete_stick" and (self.n is None or int(self.n) < 3):
            raise InvalidSpecError("shape.n must be an integer >= 3 for discrete_stick")
        if self.kind == "rw_loop" and (self.n_max is None or int(self.n_max) < 1):
            raise InvalidSpecError("shape.n_max must be an integer >= 1 for rw_loop")

    @classmethod
    def circle(cls, mass=1.0):
        return cls("circle", mass)

    @classmethod
    def stick(cls, mass=1.0):
        return cls("stick", mass)

    def to_record(self) -> dict:
        rec = {"kind": self.kind, "mass": self.mass}
        if self.n is not None:
            rec["n"] = int(self.n)
        if self.n_max is not None:
            rec["n_max"] = int(self.n_max)
        return rec

    @classmethod
    def from_record(cls, rec) -> "ShapeMeasure":
        if isinstance(rec, str):
            return cls(rec)
        unknown = set(rec) - {"kind", "mass", "n", "n_max"}
        if unknown:
            raise InvalidSpecError(f"shape: unknown field(s) {sorted(unknown)}")
        return cls(rec.get("kind", "circle"), float(rec.get("mass", 1.0)),
                   rec.get("n"), rec.get("n_max"))


@dataclass(frozen=True)
class SoupSpec:
    c: float
    shape: ShapeMeasure
    domain: Domain
    eps_min: float
    rho_max: float | None = None

    def __post_init__(self):
        if self.rho_max is None:
            object.__setattr__(self, "rho_max", float(self.domain.diameter()))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "eps_min", float(self.eps_min))
        object.__setattr__(self, "rho_max", float(self.rho_max))
        if not (self.c > 0 and math.isfinite(self.c)):
            raise InvalidSpecError(f"c must be positive, got {self.c}")
        if not self.eps_min > 0:
            raise InvalidSpecError(f"eps_min must be positive, got {self.eps_min}")
        if not self.eps_min < self.rho_max:
            raise InvalidSpecError(f"eps_min ({self.eps_min}) must be below rho_max ({self.rho_max})")
        if self.rho_max > self.domain.diameter() * (1 + 1e-12):
            raise InvalidSpecError("rho_max exceeds the domain diameter")

    def expected_candidates(self) -> float:
        x0, y0, x1, y1 = self.domain.bbox()
        area = (x1 - x0) * (y1 - y0)
        return self.c * self.shape.mass * area * (self.eps_min ** -2 - self.rho_max ** -2) / 2

    def to_record(self) -> dict:
        return {"c": self.c, "shape": self.shape.to_record(), "domain": self.domain.to_record(),
                "eps_min": self.eps_min, "rho_max": self.rho_max}

    @classmethod
    def from_record(cls, rec) -> "SoupSpec":
        return cls(rec["c"], ShapeMeasure.from_record(rec["shape"]),
                   domain_from_record(rec["domain"]), rec["eps_min"], rec.get("rho_max"))


@dataclass(frozen=True, eq=False)
class Soup:
    """A sampled soup, sorted by decreasing diameter (ties by sample index).

    ``marks`` are optional uniform labels on ``[0, spec.c)``; keeping the curves
    with mark at most ``c'`` gives a coupled soup of intensity ``c'``.
    """

    spec: SoupSpec
    curves: CurveArray
    seed: int
    marks: np.ndarray | None = None
    n_candidates: int = 0

    def __len__(self) -> int:
        return len(self.curves)

    def __iter__(self):
        return iter(self.curves)

    def diameters(self) -> np.ndarray:
        return self.curves.diameters()

    @property
    def acceptance(self) -> float:
        return len(self) / self.n_candidates if self.n_candidates else 1.0

    def take(self, idx) -> "Soup":
        marks = None if self.marks is None else self.marks[idx]
        return replace(self, curves=self.curves.take(idx), marks=marks)

    def at_intensity(self, c: float) -> "Soup":
        """The coupled sub-soup of intensity ``c <= spec.c`` (needs marks)."""
        if self.marks is None:
            raise InvalidSpecError("soup has no marks; sample with marks=True to thin it")
        if c > self.spec.c:
            raise InvalidSpecError(f"cannot raise intensity from {self.spec.c} to {c}")
        keep = self.marks <= c
        return replace(self, spec=replace(self.spec, c=c), curves=self.curves.take(keep),
                       marks=self.marks[keep])

    def with_max_diameter(self, rho: float, strict: bool = True) -> "Soup":
        d = self.diameters()
        return self.take(d < rho if strict else d <= rho)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Soup):
            return NotImplemented
        same_marks = (self.marks is None and other.marks is None) or (
            self.marks is not None and other.marks is not None
            and np.array_equal(self.marks, other.marks))
        return (self.spec == other.spec and self.seed == other.seed
                and self.curves == other.curves and same_marks)


@dataclass(frozen=True)
class BetaEstimate:
    mean: float
    half_width: float
    n: int

    def __post_init__(self):
        if self.half_width < 0 or self.n < 1:
            raise InvalidSpecError("BetaEstimate needs half_width >= 0 and n >= 1")


# -- shapes ---------------------------------------------------------------------

def _canonical_sticks(ux, uy):
    """Normalized sticks with endpoints +-u/2, anchored at the origin, as (a, b)."""
    ux = np.where(np.abs(ux) < 1e-12, 0.0, ux)
    uy = np.where(np.abs(uy) < 1e-12, 0.0, uy)
    p = np.column_stack([ux, uy]) * 0.5
    q = -p
    p_first = (p[:, 0] < q[:, 0]) | ((p[:, 0] == q[:, 0]) & (p[:, 1] < q[:, 1]))
    anchor = np.where(p_first[:, None], p, q)
    other = np.where(p_first[:, None], q, p)
    # adding 0.0 turns negative zeros into plain zeros
    return np.zeros_like(anchor), (other - anchor) + 0.0


def random_walk_loops(n: int, count: int, rng) -> list[str]:
    """Uniform closed nearest-neighbour walks of length ``2n`` as step strings.

    Two independent +-1 bridges of length 2n give the coordinates of the walk
    in the frame rotated by 45 degrees.
    """
    if count == 0:
        return []
    base = np.concatenate([np.ones(n, dtype=np.int8), -np.ones(n, dtype=np.int8)])
    a = rng.permuted(np.tile(base, (count, 1)), axis=1)
    b = rng.permuted(np.tile(base, (count, 1)), axis=1)
    dx = (a + b) // 2
    dy = (a - b) // 2
    # E=(1,0) N=(0,1) W=(-1,0) S=(0,-1)
    code = np.select([dx == 1, dy == 1, dx == -1], [0, 1, 2], 3)
    letters = np.frombuffer(b"ENWS", dtype=np.uint8)[code]
    return [row.tobytes().decode("ascii") for row in letters]


def sample_rw_loop(n: int, rng, mesh: float = 1.0, origin=(0, 0)) -> LatticeLoop:
    return LatticeLoop(origin, random_walk_loops(n, 1, rng)[0], mesh)


def _sample_normalized(shape: ShapeMeasure, rng, k: int) -> CurveArray:
    if shape.kind == "circle":
        return CurveArray("circle", xy=np.tile([0.5, 0.0], (k, 1)), r=np.full(k, 0.5))
    if shape.kind in ("stick", "discrete_stick"):
        if shape.kind == "stick":
            th = rng.uniform(0.0, 2 * np.pi, k)
        else:
            th = 2 * np.pi * rng.integers(0, int(shape.n), k) / int(shape.n)
        a, b = _canonical_sticks(np.cos(th), np.sin(th))
        return CurveArray("stick", a=a, b=b)
    walks = random_walk_loops(int(shape.n_max), k, rng)
    return CurveArray("mixed", items=[normalize(LatticeLoop((0, 0), w)) for w in walks])


def sample_shape(shape: ShapeMeasure, rng) -> object:
    """One normalized curve from ``shape`` (diameter 1, anchor at the origin)."""
    return _sample_normalized(shape, rng, 1)[0]


def _place_all(gam: CurveArray, z: np.ndarray, rho: np.ndarray) -> CurveArray:
    if gam.kind == "circle":
        return CurveArray("circle", xy=z + rho[:, None] * gam.xy, r=rho * gam.r)
    if gam.kind == "stick":
        return CurveArray("stick", a=z + rho[:, None] * gam.a, b=z + rho[:, None] * gam.b)
    return CurveArray("mixed", items=[place(g, tuple(zz), r) for g, zz, r in zip(gam.items, z, rho)])


def _contained(domain, arr: CurveArray) -> np.ndarray:
    if arr.kind == "circle":
        return domain.contains_circles(arr.xy, arr.r)
    if arr.kind == "stick":
        return domain.contains_sticks(arr.a, arr.b)
    return np.array([domain.contains_curve(g) for g in arr.items], dtype=bool)


def inverse_cube_scales(u, lo: float, hi: float) -> np.ndarray:
    """Map uniforms to scales with density proportional to ``rho**-3`` on ``[lo, hi]``."""
    return (lo ** -2 - u * (lo ** -2 - hi ** -2)) ** -0.5


def sample_soup(spec: SoupSpec, seed: int, replica=0, marks: bool = False) -> Soup:
    """Poisson sample of ``spec``.

    Draws come from substreams keyed by ``(seed, replica)``; ``replica`` may be
    an int or a tuple of ints.
    """
    key = tuple(replica) if isinstance(replica, tuple) else (replica,)
    lam = spec.expected_candidates()
    n = int(stream(seed, *key, _TAG_COUNT).poisson(lam))
    rho = inverse_cube_scales(stream(seed, *key, _TAG_SCALE).random(n),
                              spec.eps_min, spec.rho_max)
    x0, y0, x1, y1 = spec.domain.bbox()
    zr = stream(seed, *key, _TAG_POS).random((n, 2))
    z = np.column_stack([x0 + (x1 - x0) * zr[:, 0], y0 + (y1 - y0) * zr[:, 1]])
    gam = _sample_normalized(spec.shape, stream(seed, *key, _TAG_SHAPE), n)
    t = stream(seed, *key, _TAG_MARK).random(n) * spec.c if marks else None
    cand = _place_all(gam, z, rho)
    keep = np.flatnonzero(_contained(spec.domain, cand))
    curves = cand.take(keep)
    d = curves.diameters()
    order = np.argsort(-d, kind="stable")
    t_out = None if t is None else t[keep][order]
    return Soup(spec, curves.take(order), int(seed), t_out, n)


# -- random walk loop soup ------------------------------------------------------

def rw_site_mass(n) -> np.ndarray:
    """Loop-measure mass per lattice site of loops of length ``2n``."""
    n = np.asarray(n, dtype=float)
    log_c = special.gammaln(2 * n + 1) - 2 * special.gammaln(n + 1)
    return np.exp(2 * log_c - 2 * n * math.log(4.0)) / (2 * n)


def sample_rw_loop_soup(window: Domain, c: float, n_max: int, mesh: float, seed: int,
                        replica: int = 0) -> Soup:
    """Random-walk loop soup on the lattice ``mesh * Z^2`` inside ``window``.

    Loops of length ``2n`` (``1 <= n <= n_max``) are rooted at every lattice
    site with Poisson counts of mean ``c * rw_site_mass(n)``. Only loops
    contained in the window are kept.
    """
    if int(n_max) < 1:
        raise InvalidSpecError("n_max must be >= 1")
    if not mesh > 0:
        raise InvalidSpecError("mesh must be positive")
    x0, y0, x1, y1 = window.bbox()
    ii = np.arange(math.ceil(x0 / mesh), math.floor(x1 / mesh) + 1)
    jj = np.arange(math.ceil(y0 / mesh), math.floor(y1 / mesh) + 1)
    I, J = np.meshgrid(ii, jj, indexing="ij")
    sites = np.column_stack([I.ravel(), J.ravel()])
    sites = sites[window.contains_points(sites * mesh)]
    ns = np.arange(1, int(n_max) + 1)
    rng_count = stream(seed, replica, _TAG_COUNT)
    rng_site = stream(seed, replica, _TAG_POS)
    rng_walk = stream(seed, replica, _TAG_SHAPE)
    counts = rng_count.poisson(c * rw_site_mass(ns) * len(sites))
    loops = []
    total = 0
    for n, k in zip(ns, counts):
        if k == 0:
            continue
        total += int(k)
        roots = sites[rng_site.integers(0, len(sites), int(k))]
        for root, w in zip(roots, random_walk_loops(int(n), int(k), rng_walk)):
            g = LatticeLoop(tuple(root), w, mesh)
            if window.contains_curve(g):
                loops.append(g)
    arr = CurveArray("mixed", items=loops)
    order = np.argsort(-arr.diameters(), kind="stable")
    spec = SoupSpec(c, ShapeMeasure("rw_loop", n_max=int(n_max)), window,
                    eps_min=mesh, rho_max=window.diameter())
    return Soup(spec, arr.take(order), int(seed), None, total)


# -- thinness and beta ----------------------------------------------------------

def mu_L_R(shape: ShapeMeasure, R: float, pitch: float = 1e-3, samples: int = 32,
           seed: int = 0) -> float:
    """Mass of curves of diameter >= R meeting the unit disk, via
    ``m * int_0^{1/R} (dr/r) E[area{z : d(z, gamma) <= r}]``.

    Circles and sticks integrate closed-form neighbourhood areas; other
    shapes average raster neighbourhoods of ``samples`` random shapes on a
    logarithmic r-grid. Returns ``inf`` when the integrand does not vanish
    at small r (the soup is not thin).
    """
    if not R >= 2:
        raise InvalidSpecError(f"R must be >= 2, got {R}")
    top = 1.0 / R
    if shape.kind == "circle":
        g = Circle((0.5, 0.0), 1.0)
        val, _ = integrate.quad(lambda r: neighborhood_area(g, r) / r, 0.0, top,
                                epsabs=1e-13, epsrel=1e-11, limit=200)
        return shape.mass * val
    if shape.kind in ("stick", "discrete_stick"):
        g = Stick((0.0, 0.0), (1.0, 0.0))  # every normalized stick is congruent to this one
        val, _ = integrate.quad(lambda r: neighborhood_area(g, r) / r, 0.0, top,
                                epsabs=1e-13, epsrel=1e-11, limit=200)
        return shape.mass * val
    rng = stream(seed, 0, _TAG_SHAPE)
    curves = list(_sample_normalized(shape, rng, samples))
    rs = top * np.geomspace(1e-2, 1.0, 17)
    rs = rs[rs >= 2 * pitch]
    if len(rs) < 4:
        raise InvalidSpecError("pitch too coarse for this R")
    areas = np.array([np.mean([neighborhood_area(g, r, pitch) for g in curves]) for r in rs])
    slope = np.polyfit(np.log(rs[:4]), np.log(areas[:4]), 1)[0]
    if slope < 0.5:
        return math.inf
    lr = np.log(rs)
    body = integrate.trapezoid(areas, lr)
    # below the grid the area is linear in r
    head = areas[0]
    return shape.mass * float(body + head)


def beta(shape: ShapeMeasure, replicas: int = 1000, pitch: float = 1e-3, seed: int = 0) -> BetaEstimate:
    """Mean filled area ``m * E_pi[A(gamma)]``; exact for circles and sticks."""
    if replicas < 1:
        raise InvalidSpecError("replicas must be >= 1")
    if shape.kind == "circle":
        return BetaEstimate(shape.mass * math.pi / 4, 0.0, replicas)
    if shape.kind in ("stick", "discrete_stick"):
        return BetaEstimate(0.0, 0.0, replicas)
    rng = stream(seed, 0, _TAG_SHAPE)
    areas = np.empty(replicas)
    for k in range(replicas):
        g = sample_shape(shape, rng)
        if isinstance(g, LatticeLoop):
            areas[k] = lattice_filled_count(g) * g.mesh ** 2
        else:
            areas[k] = filled_area([g], pitch)
    hw = 1.96 * areas.std(ddof=1) / math.sqrt(replicas) if replicas > 1 else 0.0
    return BetaEstimate(shape.mass * float(areas.mean()), shape.mass * float(hw), replicas)


__all__ = [
    "BetaEstimate", "ShapeMeasure", "Soup", "SoupSpec", "beta",
    "inverse_cube_scales", "mu_L_R", "random_walk_loops", "rw_site_mass",
    "sample_rw_loop", "sample_rw_loop_soup", "sample_shape", "sample_soup",
]
