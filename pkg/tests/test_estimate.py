import itertools
import math

import numpy as np
import pytest

from soupfall.estimate import (
    PTable,
    box_counts,
    box_dimension,
    cle_values,
    estimate_p,
    fit_alpha,
    kappa_of_c,
    phase_scan,
    remaining_fraction,
    rw_area_check,
    small_c_report,
)
from soupfall.exceptions import DegenerateInputError, DomainError, InsufficientDataError, InvalidSpecError
from soupfall.geom import LatticeLoop, Rect, lattice_filled_count
from soupfall.soup import ShapeMeasure
from soupfall.stats import wilson

CIRCLE = ShapeMeasure.circle()


def planted_table(eps, p, trials=10**6):
    p = np.minimum(p, 1.0)
    return PTable(eps, np.full(len(eps), trials), np.round(p * trials).astype(int))


def test_ptable_invariants():
    t = PTable([0.1, 0.3, 0.2], [100, 100, 100], [50, 90, 0])
    assert t.eps.tolist() == [0.3, 0.2, 0.1]
    assert np.all(t.ci_lo <= t.p_hat) and np.all(t.p_hat <= t.ci_hi)
    with pytest.raises(InvalidSpecError):
        PTable([0.1], [10], [11])


def test_fit_alpha_planted_exponent():
    eps = np.geomspace(1e-3, 0.5, 8)
    rep = fit_alpha(planted_table(eps, eps ** 0.5))
    assert rep.alpha_hat == pytest.approx(0.5, abs=0.01)
    assert rep.dim_hat == pytest.approx(1.5, abs=0.01)
    assert rep.bracket_ok and rep.r2 > 0.999


def test_fit_alpha_constant_goes_to_intercept():
    eps = np.geomspace(1e-4, 1e-2, 6)
    rep = fit_alpha(planted_table(eps, 3 * eps ** 0.5))
    assert rep.alpha_hat == pytest.approx(0.5, abs=0.05)
    assert rep.intercept == pytest.approx(math.log(3), abs=0.05)


def test_fit_alpha_errors():
    with pytest.raises(InsufficientDataError):
        fit_alpha(PTable([0.1, 0.2], [100, 100], [50, 60]))
    with pytest.raises(InsufficientDataError):
        fit_alpha(PTable([0.1, 0.2, 0.3], [100, 100, 100], [5, 60, 70]))


def test_fit_consistency_over_repetitions():
    rng = np.random.default_rng(5)
    eps = np.geomspace(0.01, 0.5, 6)
    p = 0.8 * eps ** 0.3
    hits = 0
    reps = 300
    for _ in range(reps):
        succ = rng.binomial(2000, p)
        rep = fit_alpha(PTable(eps, np.full(6, 2000), succ))
        hits += abs(rep.alpha_hat - 0.3) <= 2 * rep.stderr
    assert hits / reps >= 0.93


def test_wilson_coverage():
    rng = np.random.default_rng(1)
    for p in (0.05, 0.5, 0.97):
        k = rng.binomial(200, p, 10_000)
        lo, hi = wilson(k, np.full(10_000, 200))
        assert np.mean((lo <= p) & (p <= hi)) >= 0.93


def test_box_dimension_square_and_segment():
    n = 512
    full = np.ones((n, n), bool)
    factors = [1, 2, 4, 8]
    rep = box_dimension(np.array(factors) / n, box_counts(full, factors))
    assert rep.dim_hat == pytest.approx(2.0, abs=0.02)
    line = np.zeros((n, n), bool)
    line[:, n // 3] = True
    rep = box_dimension(np.array(factors) / n, box_counts(line, factors))
    assert rep.dim_hat == pytest.approx(1.0, abs=0.05)
    assert rep.alpha_hat == pytest.approx(1.0, abs=0.05)


def test_box_dimension_errors():
    with pytest.raises(DegenerateInputError):
        box_dimension([0.1, 0.05, 0.025], [4, 0, 10])
    with pytest.raises(InsufficientDataError):
        box_dimension([0.1, 0.05], [4, 16])


def test_cle_values_examples():
    v = cle_values(1.0)
    assert v.kappa == pytest.approx(4, abs=1e-12)
    assert v.d == pytest.approx(1.875, abs=1e-12)
    assert v.boundary_dim == pytest.approx(1.5, abs=1e-12)
    for c in np.arange(1, 101) / 100:
        w = cle_values(c)
        assert abs(w.d - w.d_closed) < 1e-9
        assert 8 / 3 < w.kappa <= 4 and 15 / 8 <= w.d < 2
        # the inverted root reproduces c
        k = w.kappa
        assert (3 * k - 8) * (6 - k) / (2 * k) == pytest.approx(c, abs=1e-12)
    assert (cle_values(0.01).d - 2) / 0.01 == pytest.approx(-0.1, abs=5e-4)
    assert kappa_of_c(1e-9) == pytest.approx(8 / 3, abs=1e-6)
    assert cle_values(0.5, beta_value=math.pi / 4).delta == pytest.approx(2 - 0.5 * math.pi / 4)


@pytest.mark.parametrize("c", [0.0, -1.0, 1.5])
def test_cle_domain(c):
    with pytest.raises(DomainError):
        cle_values(c)


def test_estimate_p_small_intensity():
    pt = estimate_p(1e-6, CIRCLE, [0.3, 0.2], 100, seed=1)
    assert np.all(pt.p_hat >= 0.99)
    with pytest.raises(InvalidSpecError):
        estimate_p(0.2, CIRCLE, [0.3], 50)
    with pytest.raises(InvalidSpecError):
        estimate_p(0.2, CIRCLE, [1.3], 100)


def test_phase_scan_monotone():
    ps = phase_scan(CIRCLE, [1e-4, 0.3, 0.8, 1.5], 0.2, 60, seed=0, pitch_rule=4)
    assert ps.p_hat[0] >= 0.99
    assert np.all(np.diff(ps.successes) <= 0)
    with pytest.raises(InvalidSpecError):
        phase_scan(CIRCLE, [0.3, 0.1], 0.2, 10, 0)


def enumerate_mean_area(n):
    # exact mean filled area over all closed walks of length 2n from the origin
    moves = "ENWS"
    total, count = 0, 0
    for w in itertools.product(moves, repeat=2 * n):
        if w.count("E") == w.count("W") and w.count("N") == w.count("S"):
            count += 1
            total += lattice_filled_count(LatticeLoop((0, 0), "".join(w)))
    return total / count


def test_rw_area_degenerate_lengths():
    assert enumerate_mean_area(1) == 0
    assert enumerate_mean_area(2) == pytest.approx(2 / 9)
    rep = rw_area_check(1, 200, seed=0)
    assert rep.mean_area == 0
    rep = rw_area_check(2, 4000, seed=0)
    sd = math.sqrt(2 / 9 * 7 / 9 / 4000)
    assert abs(rep.mean_area - 2 / 9) < 3 * sd


def test_rw_area_enumeration_n3():
    rep = rw_area_check(3, 6000, seed=1)
    exact = enumerate_mean_area(3)
    assert abs(rep.mean_area - exact) < 3 * rep.half_width / 1.96 + 1e-12


def test_remaining_fraction_small_run():
    rf = remaining_fraction(0.5, CIRCLE, 0.05, 2.0, Rect(0, 0, 20, 20), 2.0, 20, seed=3)
    assert rf.expected == pytest.approx((0.05 / 2) ** (0.5 * math.pi / 4))
    assert rf.samples == 2000
    # cells 2 apart are nearly independent at these scales; allow a design-effect margin
    assert abs(rf.fraction - rf.expected) < 5 * rf.stderr


def test_small_c_report_sticks():
    rows, tables = small_c_report(ShapeMeasure.stick(), [0.1], [0.2, 0.1, 0.05], 100, seed=0,
                                  grid="logpolar", n_theta=64)
    assert rows[0].beta == 0.0
    assert rows[0].inequality_ok
    assert len(tables[0]) == 3
