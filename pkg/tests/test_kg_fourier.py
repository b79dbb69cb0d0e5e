import math

import numpy as np
import pytest
from scipy.integrate import quad

from gausspf.annihilator import (
    PartitionedFunction, build_annihilator, f2_shape, verify_annihilation, zero_far_field,
)
from gausspf.core_maps import GaussMapSpec
from gausspf.kg_fourier import (
    HyperbolaMeasure, LatticeCross, dirac_pair, dirac_report, kg_ladder, kg_residual,
    lattice_report, mu_hat, psi_wave, scan_grid,
)
from gausspf.transfer import GridDensity

B2 = GaussMapSpec.two_sided(2.0)


def near_only(values_fn, n=2048):
    """Partition with only an ``f1`` part on ``[-1, 1]`` at beta = 2."""
    f1 = GridDensity.from_function(values_fn, -1.0, 1.0, n)
    f2 = (GridDensity.zeros(-2.0, -1.0, 64), GridDensity.zeros(1.0, 2.0, 64))
    return PartitionedFunction(B2, f1, f2, zero_far_field(B2))


def bump(center, width):
    return lambda v: np.where(np.abs(v - center) <= width / 2, 1.0 / width, 0.0)


@pytest.fixture(scope="module")
def zero_measure():
    return HyperbolaMeasure(near_only(lambda v: 0.0 * v))


@pytest.fixture(scope="module")
def hat_measure(small_hat):
    return HyperbolaMeasure(small_hat)


def test_zero_density(zero_measure):
    assert mu_hat(zero_measure, 0.3, 0.7) == 0
    assert psi_wave(zero_measure, 1.0, -0.4) == 0
    assert kg_residual(zero_measure, 0.2, 0.1).value == 0


def test_zero_frequency_is_total_mass():
    f = near_only(bump(0.5, 0.25))
    m = HyperbolaMeasure(f)
    assert mu_hat(m, 0.0, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert psi_wave(m, 0.0, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_general_point_against_direct_quadrature():
    f = near_only(lambda v: np.where((v > 0.2) & (v < 0.9), 1 + v, 0.0), n=256)
    m = HyperbolaMeasure(f)
    near = f.near()
    for x1, x2 in [(0.7, 1.3), (-2.1, 0.4), (3.0, -2.5)]:
        total = 0j
        for a, b, c in zip(near.x0, near.x1, near.values):
            if c == 0:
                continue
            re = quad(lambda v: math.cos(math.pi * (x1 * v + x2 / v)), a, b, epsabs=1e-14)[0]
            im = quad(lambda v: math.sin(math.pi * (x1 * v + x2 / v)), a, b, epsabs=1e-14)[0]
            total += c * (re + 1j * im)
        assert mu_hat(m, x1, x2) == pytest.approx(total, abs=1e-10)


def test_conjugate_symmetry(hat_measure):
    for x1, x2 in [(0.8, 0.3), (1.7, -2.2)]:
        a = mu_hat(hat_measure, x1, x2)
        b = mu_hat(hat_measure, -x1, -x2)
        assert abs(a - b.conjugate()) <= 1e-10


def test_axis_values_match_annihilator_integrator(small_hat, hat_measure):
    rep = verify_annihilation(small_hat, 4)
    for n, fx, finv in rep.rows():
        assert abs(mu_hat(hat_measure, n, 0.0) - fx) <= 1e-10
        if n:
            assert abs(mu_hat(hat_measure, 0.0, n * 2.0) - finv) <= 1e-10


def test_lattice_cross_geometry():
    cross = LatticeCross(1.0, 2.0, 3)
    assert cross.product == 2.0
    assert len(cross.points()) == 13 and len(cross.rotated_points()) == 13
    assert (6.0, -6.0) in cross.rotated_points() and (3.0, 3.0) in cross.rotated_points()


def test_psi_vanishes_on_rotated_cross():
    f = build_annihilator(2.0, f2_shape("hat", 2.0))
    rows = lattice_report(HyperbolaMeasure(f), LatticeCross(1.0, 2.0, 4))
    assert max(r["abs"] for r in rows) < 1e-5


def test_plane_wave_limit():
    # a narrowing bump at v0 tends to the exact solution exp(i pi (v0 x1 + x2/v0))
    v0, t, x = 0.5, 0.9, -0.35
    x1, x2 = 0.5 * (t + x), 0.5 * (t - x)
    exact = np.exp(1j * math.pi * (v0 * x1 + x2 / v0))
    errs = []
    for width in (0.1, 0.02, 0.004):
        m = HyperbolaMeasure(near_only(bump(v0, width), n=4000))
        errs.append(abs(psi_wave(m, t, x) - exact))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3
    # and its Klein-Gordon residual vanishes with the step
    r = kg_ladder(HyperbolaMeasure(near_only(bump(v0, 0.004), n=4000)), t, x)
    assert 3.5 <= r.ratios[0] <= 4.5


def test_kg_ladder_second_order(hat_measure, rng):
    for t, x in rng.uniform(-3, 3, size=(2, 2)):
        lad = kg_ladder(hat_measure, t, x)
        assert all(3.5 <= q <= 4.5 for q in lad.ratios)
    with pytest.raises(ValueError):
        kg_residual(hat_measure, 0.0, 0.0, h=0.0)


def test_scan_grid_csv(tmp_path, hat_measure):
    rows = scan_grid(hat_measure, [0.0, 1.0], [0.5], tmp_path / "scan.csv")
    assert len(rows) == 2
    assert (tmp_path / "scan.csv").read_text().startswith("t,x,re_psi,im_psi")


def test_band_must_exceed_parameter(small_hat):
    with pytest.raises(ValueError):
        HyperbolaMeasure(small_hat, band=1.5)


def test_dirac_pair_cases(small_hat):
    z = dirac_pair(near_only(lambda v: 0.0 * v))
    assert z.near.sup_norm() == 0 and z.excluded_mass == 0
    away = near_only(lambda v: np.where(np.abs(v) < 0.5, 1.0, 0.0))
    p = dirac_pair(away)
    assert p.excluded_mass == 0.0
    mid = 0.5 * (p.near.x0 + p.near.x1)[p.near.values != 0]
    assert np.all(np.abs(mid) < 0.5)
    rep = dirac_report(dirac_pair(small_hat), n_max=3)
    assert math.isfinite(rep["max_abs"]) and rep["excluded_mass"] >= 0
    heavy = near_only(lambda v: np.where(np.abs(v - 1) < 0.01, 100.0, 0.0))
    with pytest.raises(ValueError):
        dirac_pair(heavy, epsilon=0.02, max_excluded=0.01)
