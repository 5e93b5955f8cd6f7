import math

import numpy as np
import pytest

from soupfall.exceptions import GeometryError, ResolutionError
from soupfall.geom import (
    Annulus,
    Circle,
    CurveArray,
    Disk,
    LatticeLoop,
    PolyLoop,
    Raster,
    Rect,
    Stick,
    UnitDisk,
    anchor,
    curves_cross,
    diameter,
    domain_from_record,
    filled_area,
    from_record,
    interior_contains,
    lattice_filled_count,
    neighborhood_area,
    normalize,
    place,
    rasterize_interiors,
    to_record,
)


def two_circle_union(r, d):
    # union of two equal discs of radius r at centre distance d < 2r
    lens = 2 * r * r * math.acos(d / (2 * r)) - 0.5 * d * math.sqrt(4 * r * r - d * d)
    return 2 * math.pi * r * r - lens


def test_diameter_examples():
    assert diameter(Circle((3, -1), 0.5)) == 0.5
    assert diameter(Stick((0, 0), (3, 4))) == 5
    assert diameter(LatticeLoop((0, 0), "ENWS")) == pytest.approx(math.sqrt(2))


def test_anchor_examples():
    assert anchor(Circle((0.5, 0), 1)) == (0.0, 0.0)
    assert anchor(Stick((1, 2), (0, 5))) == (0.0, 5.0)
    # vertical stick: the lower endpoint wins
    assert anchor(Stick((0, 1), (0, -1))) == (0.0, -1.0)


def test_place_examples():
    assert place(Circle((0.5, 0), 1), (2, 3), 2) == Circle((3, 3), 2)
    assert place(Stick((0, 0), (1, 0)), (1, 1), 0.5) == Stick((1, 1), (1.5, 1))
    g = Stick((0.2, 0.3), (1.0, -2.0))
    assert place(g, (0, 0), 1) == g


def test_normalize_has_unit_diameter_and_origin_anchor():
    for g in (Circle((4, 4), 3), Stick((1, 2), (4, 6)), LatticeLoop((2, 1), "EENNWWSS", 0.5)):
        n = normalize(g)
        assert diameter(n) == pytest.approx(1.0)
        assert anchor(n) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_interior_contains():
    assert interior_contains(Circle((0, 0), 1), (0.2, 0))
    assert not interior_contains(Circle((0, 0), 1), (0.6, 0))
    assert not interior_contains(Stick((0, 0), (1, 0)), (0.5, 0))


def test_figure_eight_lobes_are_interior():
    # two unit squares sharing the vertex (1, 1)
    loop = LatticeLoop((0, 0), "ENENWSWS")
    assert interior_contains(loop, (0.5, 0.5))
    assert interior_contains(loop, (1.5, 1.5))
    assert not interior_contains(loop, (1.5, 0.5))
    assert lattice_filled_count(loop) == 2


def test_curves_cross_examples():
    assert not curves_cross(Circle((0, 0), 1), Circle((0, 0), 0.5))
    assert curves_cross(Circle((0, 0), 1), Circle((0.8, 0), 1))
    assert curves_cross(Stick((0, 0), (1, 1)), Stick((0, 1), (1, 0)))
    assert not curves_cross(Circle((0, 0), 1), Circle((3, 0), 1))
    # a stick poking into a disc meets its interior
    assert curves_cross(Stick((-1, 0), (0, 0)), Circle((0, 0), 1))


def test_filled_area_disc_and_square():
    assert filled_area([Circle((0, 0), 1)], 1 / 512) == pytest.approx(math.pi / 4, rel=0.02)
    sq = PolyLoop(((0, 0), (1, 0), (1, 1), (0, 1)))
    assert filled_area([sq], 1 / 512) == pytest.approx(1.0, rel=0.01)


def test_filled_area_stick_vanishes():
    pitch = 1 / 128
    assert filled_area([Stick((0, 0), (0.7, 0.3))], pitch) <= 2 * diameter(Stick((0, 0), (0.7, 0.3))) * 2 * pitch


def test_filled_area_two_circles_matches_union_formula():
    got = filled_area([Circle((0, 0), 1), Circle((0.8, 0), 1)], 1 / 512)
    assert got == pytest.approx(two_circle_union(0.5, 0.8), rel=0.01)


def test_filled_area_is_at_least_member_filling():
    cs = [Circle((0, 0), 1), Circle((0.9, 0), 0.4)]
    assert filled_area(cs, 1 / 256) >= filled_area(cs[:1], 1 / 256)


def test_filled_area_rejects_bad_pitch():
    with pytest.raises(ResolutionError):
        filled_area([Circle((0, 0), 1)], 0.0)


def test_filled_area_error_shrinks_with_pitch():
    errs = [abs(filled_area([Circle((0, 0), 1)], p) - math.pi / 4) for p in (1 / 64, 1 / 512)]
    assert errs[1] < errs[0]


def test_neighborhood_area_closed_forms():
    assert neighborhood_area(Circle((0, 0), 1), 0.1) == pytest.approx(0.2 * math.pi)
    assert neighborhood_area(Stick((0, 0), (1, 0)), 0.1) == pytest.approx(0.2 + math.pi * 0.01)
    assert neighborhood_area(Circle((0, 0), 1), 10) == pytest.approx(math.pi * 10.5 ** 2)


def test_neighborhood_area_raster_path():
    sq = PolyLoop(((0, 0), (1, 0), (1, 1), (0, 1)))
    r = 0.1
    # outer rounded square minus inner square of side 1 - 2r
    exact = (1 + 4 * r + math.pi * r * r) - (1 - 2 * r) ** 2
    assert neighborhood_area(sq, r, 1 / 512) == pytest.approx(exact, rel=0.01)


def test_rasterize_interiors():
    win = Rect.square(1.0)
    assert rasterize_interiors([], win, 1 / 64).count() == 0
    ras = rasterize_interiors([Circle((0, 0), 1)], win, 1 / 256)
    assert ras.area() == pytest.approx(math.pi / 4, rel=0.02)
    nested = rasterize_interiors([Circle((0, 0), 1), Circle((0.1, 0), 0.4)], win, 1 / 256)
    assert nested == ras


def test_raster_pgm_round_trip():
    ras = rasterize_interiors([Circle((0.2, 0.1), 0.7)], Rect(0, 0, 1, 0.5), 1 / 64)
    back = Raster.from_pgm(ras.to_pgm(), ras.origin, ras.pitch)
    assert back == ras
    assert ras.to_pgm().startswith(b"P5\n")


def test_domain_containment():
    d = UnitDisk()
    assert d.contains_curve(Circle((0, 0), 1))
    assert not d.contains_curve(Circle((0.6, 0), 1))
    a = Annulus((0, 0), 0.1, 1.0)
    assert not a.contains_curve(Stick((-0.5, 0), (0.5, 0)))
    assert a.contains_curve(Stick((0.2, 0), (0.5, 0)))
    assert Rect(0, 0, 2, 1).area() == 2


@pytest.mark.parametrize("rec", ["unit_disk", "unit_square",
                                 {"kind": "disk", "center": [1, 2], "radius": 3},
                                 {"kind": "annulus", "r_in": 0.2, "r_out": 1.0}])
def test_domain_records(rec):
    dom = domain_from_record(rec)
    assert domain_from_record(dom.to_record()) == dom


def test_domain_errors():
    with pytest.raises(GeometryError):
        domain_from_record({"kind": "hexagon"})
    with pytest.raises(GeometryError):
        Disk((0, 0), -1)
    with pytest.raises(GeometryError):
        Rect(1, 0, 0, 1)


def test_curve_records_round_trip():
    for g in (Circle((0.25, -1), 0.5), Stick((0, 0), (1, 2)),
              PolyLoop(((0, 0), (1, 0), (0, 1))), LatticeLoop((1, -2), "ENWS", 0.25, (0.5, 0.5))):
        assert from_record(to_record(g)) == g


def test_invalid_curves():
    with pytest.raises(GeometryError):
        Circle((0, 0), 0)
    with pytest.raises(GeometryError):
        Stick((1, 1), (1, 1))
    with pytest.raises(GeometryError):
        LatticeLoop((0, 0), "ENW")


def test_curve_array_round_trip():
    cs = [Circle((0, 0), 1), Circle((2, 0), 0.5)]
    arr = CurveArray.from_curves(cs)
    assert arr.kind == "circle"
    assert list(arr) == cs
    np.testing.assert_allclose(arr.diameters(), [1, 0.5])
    assert arr.take([1])[0] == cs[1]
