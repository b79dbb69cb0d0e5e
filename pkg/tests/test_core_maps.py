import math

import numpy as np
import pytest

from gausspf.core_maps import (
    GaussMapSpec, IntervalUnion, apply_map, branches, covering_time, derivative,
    frac_part_1, frac_part_2, inverse_branch, iterate_interval, orbit,
)

GOLDEN = (math.sqrt(5) - 1) / 2


def test_frac_part_1_examples():
    assert frac_part_1(2.25) == 0.25
    assert frac_part_1(-0.25) == 0.75
    assert frac_part_1(0.0) == 0.0


def test_frac_part_2_examples():
    assert frac_part_2(3.5) == -0.5
    assert frac_part_2(1.0) == 1.0
    assert frac_part_2(-1.0) == 1.0


def test_frac_parts_reject_non_finite():
    for fn in (frac_part_1, frac_part_2):
        with pytest.raises(ValueError):
            fn(math.inf)
        with pytest.raises(ValueError):
            fn(math.nan)


def test_frac_part_lattice_property(rng):
    t = rng.uniform(-1e3, 1e3, 2000)
    r1, r2 = frac_part_1(t), frac_part_2(t)
    assert np.all((r1 >= 0) & (r1 < 1)) and np.all((r2 > -1) & (r2 <= 1))
    tol = 4 * np.spacing(np.abs(t))
    assert np.all(np.abs((t - r1) - np.round(t - r1)) <= tol)
    assert np.all(np.abs((t - r2) / 2 - np.round((t - r2) / 2)) <= tol)


def test_apply_map_examples():
    b3 = GaussMapSpec.two_sided(3)
    assert apply_map(b3, 0.9) == pytest.approx(2 / 3, abs=1e-15)
    assert apply_map(b3, 0.0) == 0.0
    assert apply_map(GaussMapSpec.one_sided(1), 0.0) == 0.0
    assert apply_map(GaussMapSpec.one_sided(1), GOLDEN) == pytest.approx(GOLDEN, abs=1e-15)


def test_apply_map_rejects_outside_domain():
    with pytest.raises(ValueError):
        apply_map(GaussMapSpec.two_sided(3), 1.5)
    with pytest.raises(ValueError):
        apply_map(GaussMapSpec.one_sided(2), -0.1)


def test_parameter_below_one_rejected():
    with pytest.raises(ValueError):
        GaussMapSpec.two_sided(0.5)


def test_derivative_examples():
    assert derivative(GaussMapSpec.two_sided(3), 1.0) == pytest.approx(3.0)
    assert derivative(GaussMapSpec.two_sided(3), 0.9) == pytest.approx(3 / 0.81)
    assert derivative(GaussMapSpec.one_sided(2), 1.0) == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        derivative(GaussMapSpec.two_sided(3), 0.0)


def test_branch_examples():
    b3 = branches(GaussMapSpec.two_sided(3))
    I2 = b3.get(2)
    assert (I2.lo, I2.hi) == pytest.approx((0.6, 1.0)) and I2.complete

    b32 = branches(GaussMapSpec.two_sided(1.5))
    assert b32.edge_index == 1
    I1 = b32.get(1)
    assert (I1.lo, I1.hi) == pytest.approx((0.5, 1.0)) and not I1.complete

    g2 = branches(GaussMapSpec.one_sided(2))
    J2 = g2.get(2)
    assert (J2.lo, J2.hi) == pytest.approx((2 / 3, 1.0)) and J2.complete


def test_branches_max_index_too_small():
    with pytest.raises(ValueError):
        branches(GaussMapSpec.two_sided(7), max_index=2)


def test_inverse_branch_examples():
    b3 = GaussMapSpec.two_sided(3)
    assert inverse_branch(b3, 2, 2 / 3) == pytest.approx(0.9)
    assert inverse_branch(b3, -2, 0.0) == pytest.approx(-0.75)
    assert inverse_branch(GaussMapSpec.one_sided(1), 1, GOLDEN) == pytest.approx(GOLDEN)


@pytest.mark.parametrize("spec", [GaussMapSpec.two_sided(3), GaussMapSpec.two_sided(1.5),
                                  GaussMapSpec.two_sided(2.7), GaussMapSpec.one_sided(1),
                                  GaussMapSpec.one_sided(2.5)])
def test_inverse_roundtrip_and_expansion(spec, rng):
    dec = branches(spec, max_index=30)
    for br in dec:
        y = rng.uniform(br.image_lo, br.image_hi, 1000)
        x = inverse_branch(spec, br.index, y)
        assert np.all((x >= br.lo) & (x <= br.hi))
        assert np.max(np.abs(apply_map(spec, x) - y)) <= 1e-12
        xi = rng.uniform(br.lo, br.hi, 50)
        xi = xi[(xi > br.lo) & (xi < br.hi)]
        assert np.all(np.abs(derivative(spec, xi)) >= spec.parameter * (1 - 1e-14))


def test_iterate_interval_examples():
    b3 = GaussMapSpec.two_sided(3)
    img = iterate_interval(b3, IntervalUnion.from_pairs([(0.6, 1.0)]), 1)
    assert img.contains_interval(-1 + 1e-12, 1 - 1e-12)
    assert iterate_interval(b3, IntervalUnion.from_pairs([]), 1).is_empty()

    b32 = GaussMapSpec.two_sided(1.5)
    right = iterate_interval(b32, IntervalUnion.from_pairs([(0.5, 1.0)]), 1)
    assert np.allclose(right.intervals, [(-1.0, 0.5)])
    left = iterate_interval(b32, IntervalUnion.from_pairs([(-1.0, -0.5)]), 1)
    assert np.allclose(left.intervals, [(-0.5, 1.0)])


def test_covering_time_examples():
    b3 = GaussMapSpec.two_sided(3)
    assert covering_time(b3, (0.6, 1.0), 1e-6) == 1
    assert covering_time(b3, (0.61, 0.62), 1e-6) is not None
    n = covering_time(GaussMapSpec.two_sided(1.5), (-1.0, -0.5), 1e-6)
    assert n is not None and n <= 3


def test_covering_time_rejects_empty_and_bad_delta():
    b3 = GaussMapSpec.two_sided(3)
    with pytest.raises(ValueError):
        covering_time(b3, [], 1e-6)
    with pytest.raises(ValueError):
        covering_time(b3, (0.1, 0.2), 0.0)


def test_orbit_examples():
    o = orbit(GaussMapSpec.one_sided(1), GOLDEN, 3)
    assert np.allclose(o.points, GOLDEN, atol=1e-14)
    z = orbit(GaussMapSpec.two_sided(3), 0.0, 5)
    assert np.all(z.points == 0) and z.event == "zero" and z.event_step == 0
    b = orbit(GaussMapSpec.two_sided(3), 0.9, 2)
    assert b.points == pytest.approx([0.9, 2 / 3, -0.5], abs=1e-14)
