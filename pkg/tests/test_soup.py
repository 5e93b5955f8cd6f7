import math
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from scipy import integrate, stats

from soupfall.exceptions import InvalidSpecError
from soupfall.geom import Circle, LatticeLoop, Rect, UnitDisk, anchor, diameter
from soupfall.rng import stream
from soupfall.soup import (
    ShapeMeasure,
    SoupSpec,
    beta,
    mu_L_R,
    random_walk_loops,
    rw_site_mass,
    sample_rw_loop_soup,
    sample_shape,
    sample_soup,
)

CIRCLE = ShapeMeasure.circle()
STICK = ShapeMeasure.stick()


def rw_mass_oracle(n):
    # exact rational per-site mass of loops of length 2n
    return Fraction(comb(2 * n, n) ** 2, 4 ** (2 * n) * 2 * n)


def test_shape_measure_validation():
    with pytest.raises(InvalidSpecError):
        ShapeMeasure("triangle")
    with pytest.raises(InvalidSpecError):
        ShapeMeasure("circle", mass=0)
    with pytest.raises(InvalidSpecError):
        ShapeMeasure("discrete_stick")
    with pytest.raises(InvalidSpecError):
        ShapeMeasure.from_record({"kind": "circle", "radius": 1})
    s = ShapeMeasure("rw_loop", 2.0, n_max=5)
    assert ShapeMeasure.from_record(s.to_record()) == s


def test_soup_spec_validation():
    with pytest.raises(InvalidSpecError):
        SoupSpec(0.0, CIRCLE, UnitDisk(), 0.1)
    with pytest.raises(InvalidSpecError):
        SoupSpec(1.0, CIRCLE, UnitDisk(), 3.0)
    with pytest.raises(InvalidSpecError):
        SoupSpec(1.0, CIRCLE, UnitDisk(), 0.1, 5.0)
    assert SoupSpec(1.0, CIRCLE, UnitDisk(), 0.1).rho_max == 2.0


def test_circle_shape_is_dirac():
    rng = stream(1)
    for _ in range(3):
        assert sample_shape(CIRCLE, rng) == Circle((0.5, 0.0), 1.0)


def test_stick_directions_uniform():
    from soupfall.soup import _sample_normalized

    arr = _sample_normalized(STICK, stream(11), 100_000)
    ang = np.mod(np.arctan2(arr.b[:, 1], arr.b[:, 0]), np.pi)
    assert stats.kstest(ang / np.pi, "uniform").pvalue > 0.01
    np.testing.assert_allclose(arr.diameters(), 1.0)
    assert np.all(arr.a == 0)


def test_discrete_stick_four_gon():
    from soupfall.soup import _sample_normalized

    n = 4000
    arr = _sample_normalized(ShapeMeasure("discrete_stick", n=4), stream(5), n)
    kinds = {tuple(b) for b in arr.b.tolist()}
    assert len(kinds) == 2
    horiz = int(np.sum(arr.b[:, 1] == 0))
    sigma = math.sqrt(n * 0.25)
    assert abs(horiz - n / 2) < 3 * sigma


def test_sampled_curves_are_normalized():
    rng = stream(2)
    for shape in (STICK, ShapeMeasure("rw_loop", n_max=6)):
        g = sample_shape(shape, rng)
        assert diameter(g) == pytest.approx(1.0)
        assert anchor(g) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_sample_soup_deterministic_and_sorted():
    spec = SoupSpec(0.3, CIRCLE, UnitDisk(), 0.05)
    a, b = sample_soup(spec, 7), sample_soup(spec, 7)
    assert a == b
    assert np.all(np.diff(a.diameters()) <= 0)
    assert all(spec.domain.contains_curve(g) for g in a)
    assert sample_soup(spec, 8) != a
    assert np.all(a.diameters() >= 0.05)


def test_sample_soup_tiny_intensity_is_empty():
    spec = SoupSpec(1e-12, CIRCLE, UnitDisk(), 0.05)
    assert spec.expected_candidates() < 1e-8
    assert len(sample_soup(spec, 0)) == 0


def test_marks_give_coupled_thinning():
    spec = SoupSpec(0.4, CIRCLE, UnitDisk(), 0.05)
    s = sample_soup(spec, 3, marks=True)
    thin = s.at_intensity(0.1)
    assert len(thin) <= len(s)
    assert np.all(thin.marks <= 0.1)
    with pytest.raises(InvalidSpecError):
        sample_soup(spec, 3).at_intensity(0.1)


def test_anchor_band_count_small_run():
    # mean number of curves with diameter in [1, 2] anchored in [-1, 1]^2 is 3/2
    spec = SoupSpec(1.0, CIRCLE, Rect.square(10), 1.0, 2.0)
    counts = []
    for r in range(600):
        s = sample_soup(spec, 21, r)
        xy = s.curves.xy - np.column_stack([s.curves.r, np.zeros(len(s))])
        counts.append(int(np.sum(np.all(np.abs(xy) <= 1, axis=1))))
    m = np.mean(counts)
    assert abs(m - 1.5) < 4 * math.sqrt(1.5 / len(counts))


def test_rw_site_mass_oracle():
    assert rw_site_mass(1) == pytest.approx(1 / 8)
    exact = sum(rw_mass_oracle(n) for n in range(1, 101))
    assert float(np.sum(rw_site_mass(np.arange(1, 101)))) == pytest.approx(float(exact), rel=1e-12)
    assert float(exact) == pytest.approx(0.21846909479324605, rel=1e-14)


def test_random_walk_loops_are_closed():
    walks = random_walk_loops(7, 200, stream(4))
    for w in walks:
        assert len(w) == 14
        assert w.count("E") == w.count("W") and w.count("N") == w.count("S")


def test_random_walk_loops_uniform_on_length_four():
    # 36 closed walks of length 4 from the origin, each with probability 1/36
    walks = random_walk_loops(2, 36_000, stream(9))
    freq = {}
    for w in walks:
        freq[w] = freq.get(w, 0) + 1
    assert len(freq) == 36
    assert stats.chisquare(list(freq.values())).pvalue > 0.001


def test_rw_loop_soup_loops_inside_window():
    win = Rect(0, 0, 20, 20)
    s = sample_rw_loop_soup(win, 1.0, 5, 1.0, seed=2)
    assert len(s) > 0
    for g in s:
        assert isinstance(g, LatticeLoop)
        assert len(g.steps) % 2 == 0
        assert win.contains_curve(g)


def test_mu_L_R_closed_forms():
    assert mu_L_R(CIRCLE, 4) == pytest.approx(math.pi / 2, rel=1e-6)
    stick_oracle = integrate.quad(lambda r: (2 * r + math.pi * r * r) / r, 0, 0.25)[0]
    assert stick_oracle == pytest.approx(2 / 4 + math.pi / 32)
    assert mu_L_R(STICK, 4) == pytest.approx(stick_oracle, rel=5e-3)
    assert mu_L_R(CIRCLE, 8) / mu_L_R(CIRCLE, 4) == pytest.approx(0.5, abs=1e-6)


def test_beta_exact_paths():
    assert beta(CIRCLE).mean == pytest.approx(math.pi / 4)
    assert beta(ShapeMeasure.circle(2.0)).mean == pytest.approx(math.pi / 2)
    assert beta(STICK).mean == 0.0
    assert beta(ShapeMeasure("discrete_stick", n=6)).mean == 0.0
