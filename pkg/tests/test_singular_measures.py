import math
from fractions import Fraction

import numpy as np
import pytest

from gausspf.singular_measures import (
    TEST_FUNCTIONS, ContinuedFractionExpansion, DiscretePeriodicMeasure, MarkovWeights,
    cf_expand, cylinder_interval, gauss_map, invariance_check, markov_cylinder_mass,
    minkowski_cylinder_mass, minkowski_invariance_residual, minkowski_q, minkowski_table,
    mix, orbit_listing, periodic_point, periodic_points, word_quadratic,
)

GOLDEN = (math.sqrt(5) - 1) / 2


def test_cf_examples():
    assert cf_expand(0.5) == ContinuedFractionExpansion((2,), True)
    assert cf_expand(1 / 3).partial_quotients == (3,)
    assert cf_expand(1 / 3).terminated
    g = cf_expand(GOLDEN, depth=30)
    assert g.partial_quotients == (1,) * 30 and not g.terminated


def test_cf_exact_fraction_and_reconstruction():
    cf = cf_expand(Fraction(355, 113) - 3)
    assert cf.partial_quotients == (7, 16) and cf.terminated
    assert cf.convergents() == [Fraction(1, 7), Fraction(16, 113)]
    x = math.pi - 3
    assert cf_expand(x, 12).value() == pytest.approx(x, abs=1e-12)


def test_cf_validation():
    with pytest.raises(ValueError):
        cf_expand(1.2)
    with pytest.raises(ValueError):
        ContinuedFractionExpansion((1, 0), True)


def test_minkowski_examples():
    assert minkowski_q(0.0) == 0.0 and minkowski_q(1.0) == 1.0
    assert minkowski_q(0.5) == 0.5
    assert minkowski_q(GOLDEN) == pytest.approx(2 / 3, abs=1e-10)
    assert minkowski_q(Fraction(1, 3)) == 0.25
    assert minkowski_q(Fraction(2, 5)) == 0.375


def test_minkowski_monotone_and_dyadic(rng):
    # near rationals ? is flat below double precision (a quotient of 60 moves it
    # by about 2^-60), so floats only give weak monotonicity
    xs = np.sort(rng.uniform(0, 1, 400))
    qs = np.array([minkowski_q(x) for x in xs])
    assert np.all(np.diff(qs) >= 0)
    # on the Farey sequence of order 30 the values are exact dyadics, strictly increasing
    farey = sorted({Fraction(p, q) for q in range(1, 31) for p in range(0, q + 1)})
    vals = [minkowski_q(x) for x in farey]
    assert all(b > a for a, b in zip(vals[:-1], vals[1:]))
    assert all((v * 2**62).is_integer() for v in vals)


def test_minkowski_invariance_examples(rng):
    assert minkowski_invariance_residual(0.5) <= 1e-8
    assert minkowski_invariance_residual(GOLDEN) <= 1e-8
    assert minkowski_invariance_residual(1e-9) <= 1e-8
    ts = rng.uniform(0, 1, 50)
    assert max(minkowski_invariance_residual(t) for t in ts) <= 1e-8


def test_markov_weights():
    w = MarkovWeights.minkowski()
    assert markov_cylinder_mass(w, [1]) == 0.5
    assert markov_cylinder_mass(w, [2, 1]) == 0.125
    assert markov_cylinder_mass(w, []) == 1.0
    with pytest.raises(ValueError):
        MarkovWeights(np.array([0.5, 0.2]), 0.0)


def test_markov_shift_consistency():
    w = MarkovWeights.minkowski(60)
    for word in ([1], [2, 1], [3, 1, 2]):
        total = sum(markov_cylinder_mass(w, [b] + word) for b in range(1, 61))
        assert total == pytest.approx(markov_cylinder_mass(w, word) * (1 - w.tail), abs=1e-15)


def test_minkowski_cylinder_mass_matches_digit_law():
    w = MarkovWeights.minkowski()
    for word in ([1], [2], [1, 1], [2, 3], [1, 4, 2]):
        assert minkowski_cylinder_mass(word) == pytest.approx(markov_cylinder_mass(w, word),
                                                              abs=1e-15)
    assert cylinder_interval([2]) == (Fraction(1, 3), Fraction(1, 2))


def test_periodic_examples():
    assert periodic_point([1]) == pytest.approx(GOLDEN, abs=1e-15)
    assert periodic_point([2]) == pytest.approx(math.sqrt(2) - 1, abs=1e-15)
    assert word_quadratic([1]) == (1, 1, -1)
    assert word_quadratic([2]) == (1, 2, -1)
    m = DiscretePeriodicMeasure.from_word([1, 2])
    assert m.period == 2
    assert m.quadratic_residual() <= 1e-12
    assert gauss_map(m.orbit[0]) == pytest.approx(m.orbit[1], abs=1e-14)


def test_quadratics_are_integer_but_not_always_monic():
    p, q, r = word_quadratic([2, 1])
    assert (p, q, r) == (2, 2, -1)
    assert all(isinstance(c, int) for c in (p, q, r))


def test_periodic_enumeration_deduplicates_rotations():
    ms = periodic_points(2, 2)
    assert sorted(m.word for m in ms) == [(1,), (1, 2), (2,)]
    assert len(periodic_points(4, 5)) == 205
    with pytest.raises(ValueError):
        DiscretePeriodicMeasure.from_word([1, 1])


def test_periodic_measures_invariant():
    for m in periodic_points(4, 5):
        assert m.total_mass == pytest.approx(1.0, abs=1e-15)
        assert m.closure_residual() <= 1e-10
        assert m.quadratic_residual() <= 1e-9
        assert max(invariance_check(m, g) for g in TEST_FUNCTIONS) <= 1e-12


def test_invariance_check_examples():
    golden = DiscretePeriodicMeasure.from_word([1])
    assert invariance_check(golden, lambda x: 0 * x + 3.0) == 0.0
    assert invariance_check(golden, lambda x: x) <= 1e-15
    two = DiscretePeriodicMeasure.from_word([1, 3])
    assert invariance_check(two, lambda x: np.exp(2j * np.pi * x)) <= 1e-12


def test_mixtures_stay_invariant():
    ms = periodic_points(3, 3)
    mu = mix(ms[:4], [0.1, 0.2, 0.3, 0.4])
    assert mu.total_mass == pytest.approx(1.0)
    assert max(invariance_check(mu, g) for g in TEST_FUNCTIONS) <= 1e-12
    with pytest.raises(ValueError):
        mix(ms[:2], [1.0])


def test_exports(tmp_path):
    rows = minkowski_table([0.0, 0.5, 1.0], tmp_path / "q.csv")
    assert rows[0] == (0.0, 0.0) and rows[-1] == (1.0, 1.0)
    listing = orbit_listing(periodic_points(1, 2), tmp_path / "orbits.csv")
    assert listing[0]["word"] == [1] and (tmp_path / "orbits.csv").exists()
