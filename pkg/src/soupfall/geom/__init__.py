"""Curves, domains and raster geometry."""
from .arrays import CurveArray, as_curve_array
from .curves import (
    Circle,
    Curve,
    LatticeLoop,
    Point,
    PolyLoop,
    Stick,
    anchor,
    bbox,
    diameter,
    from_record,
    length,
    normalize,
    place,
    polyline,
    segments,
    steps_from_moves,
    to_record,
)
from .domain import Annulus, Disk, Domain, Rect, UnitDisk, domain_from_record
from .predicates import (
    contains_points,
    curves_cross,
    distance_to,
    interior_contains,
    lattice_filled_count,
    lattice_filling,
    meets_interior,
)
from .raster import (
    Raster,
    coarsen,
    exterior_mask,
    filled_area,
    mark_interiors,
    mark_sticks,
    mark_traces,
    neighborhood_area,
    rasterize_interiors,
)

__all__ = [
    "Annulus", "Circle", "Curve", "CurveArray", "Disk", "Domain", "LatticeLoop",
    "Point", "PolyLoop", "Raster", "Rect", "Stick", "UnitDisk", "anchor",
    "as_curve_array", "bbox", "coarsen", "contains_points", "curves_cross",
    "diameter", "distance_to", "domain_from_record", "exterior_mask", "filled_area",
    "from_record", "interior_contains", "lattice_filled_count", "lattice_filling",
    "length", "mark_interiors", "mark_sticks", "mark_traces", "meets_interior",
    "neighborhood_area", "normalize", "place", "polyline", "rasterize_interiors",
    "segments", "steps_from_moves", "to_record",
]
