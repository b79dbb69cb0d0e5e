import math

import numpy as np
import pytest
from scipy.special import zeta

from conftest import SMALL
from gausspf.annihilator import (
    F2_SHAPES, CellFunction, build_annihilator, build_annihilator_plus, check_necsuf,
    f2_shape, factorization_residual, gram_matrix, numerical_rank, s_star, t_star,
    t_star_plus, verify_annihilation, verify_annihilation_plus, verify_transported,
    weighted_l2_norm, with_far_field, zero_far_field,
)
from gausspf.core_maps import GaussMapSpec
from gausspf.transfer import GridDensity


def zero(x):
    return 0.0 * np.asarray(x, dtype=float)


# --- S* and T* --------------------------------------------------------------

def test_s_star_single_term():
    ind = lambda y: np.where((y >= 1) & (y <= 3), 1.0, 0.0)
    assert s_star(ind, 0.5, support=(1.0, 3.0)).value == 1.0
    assert s_star(zero, np.array([0.1, -0.4]), support=(-5.0, 5.0)).value.tolist() == [0, 0]


def test_s_star_inverse_square_against_hurwitz_zeta():
    h = lambda y: np.where(np.abs(y) > 1, 1.0 / np.where(y == 0, 1.0, y) ** 2, 0.0)
    x = np.array([-0.7, -0.1, 0.3, 0.9])
    exact = 0.25 * (zeta(2.0, 1 + x / 2) + zeta(2.0, 1 - x / 2))
    got = s_star(h, x, k_trunc=1000, decay=1.0)
    assert np.max(np.abs(got.value - exact)) <= 1e-8
    assert got.tail_bound < 1e-3
    # brute force to k = 10^6 sits within its own truncation of the exact value
    ks = np.arange(1, 10**6 + 1)
    brute = np.sum(1 / (0.3 + 2 * ks) ** 2) + np.sum(1 / (0.3 - 2 * ks) ** 2)
    assert abs(brute - exact[2]) < 1e-6
    with pytest.raises(ValueError):
        s_star(h, x)


def test_t_star_zero_and_domain():
    assert np.all(t_star(2.0, zero, np.array([2.5, -7.0])).value == 0)
    with pytest.raises(ValueError):
        t_star(2.0, zero, np.array([1.5]))


@pytest.mark.parametrize("beta", [2.0, 1.5, 3.3])
def test_t_star_mass_identity(beta):
    h = lambda x: np.where(np.abs(x) <= beta, 1.0 + 0.3 * x + 0.2 * np.cos(3 * x), 0.0)
    xs, ws = np.polynomial.legendre.leggauss(16)
    total = 0.0
    for sgn in (1.0, -1.0):
        edges = np.geomspace(1e-7, 1.0, 120)
        a, b = edges[:-1], edges[1:]
        u = ((a + b) / 2)[:, None] + ((b - a) / 2)[:, None] * xs
        y = sgn * beta / u
        vals = t_star(beta, h, y, j_trunc=2000).value * beta / u**2
        total += np.sum((b - a) / 2 * (vals @ ws))
    pts, wts = np.polynomial.legendre.leggauss(64)
    mass = beta * np.sum(wts * h(beta * pts))
    assert total == pytest.approx(mass, abs=1e-6)


def test_t_star_inverse_square_envelope():
    beta = 2.0
    h = lambda x: np.where(np.abs(x) <= beta, 1.0 + x**2, 0.0)
    y = np.concatenate([np.geomspace(2 * beta, 1e5, 200), -np.geomspace(2 * beta, 1e5, 200)])
    env = np.abs(t_star(beta, h, y).value) * y**2
    assert np.max(env) <= 5.0 * beta**2 * math.pi**2 / 6


def test_t_star_plus_zero():
    assert np.all(t_star_plus(2.0, zero, np.array([2.5, 9.0])).value == 0)


# --- factorisation ---------------------------------------------------------

def _random_step(rng, spec, n=64):
    a, b = spec.domain
    g = GridDensity(a, b, rng.uniform(-1.0, 1.0, n))
    return CellFunction.from_grids(g)


@pytest.mark.parametrize("spec", [GaussMapSpec.two_sided(2.0), GaussMapSpec.two_sided(1.5),
                                  GaussMapSpec.one_sided(2.0)])
def test_factorisation_identity(spec, rng):
    h = _random_step(rng, spec)
    assert factorization_residual(spec, h) <= 1e-6


# --- construction ----------------------------------------------------------

def test_zero_f2_gives_zero_partition():
    f = build_annihilator(2.0, zero, SMALL)
    assert f.f1.l1_norm == 0 and f.f3.is_zero
    rep = verify_annihilation(f, 5)
    assert rep.max_residual == 0.0
    assert weighted_l2_norm(f).total == 0.0
    assert tuple(check_necsuf(f)) == (True, True)
    g = build_annihilator_plus(2.0, zero, SMALL)
    assert g.f1.l1_norm == 0 and g.f3.is_zero


def test_extension_property_is_exact(small_hat):
    shape = f2_shape("hat", 2.0)
    right = small_hat.f2[1]
    expected = GridDensity.from_function(shape, right.a, right.b, right.n_cells)
    assert np.array_equal(right.values, expected.values)
    assert np.all(small_hat.f2[0].values == 0)


def test_mean_zero_chain(rng):
    for _ in range(3):
        c = rng.uniform(-1, 1, 3)
        f2 = lambda x, c=c: np.where(np.abs(x) >= 1, c[0] + c[1] * x + c[2] * x**2, 0.0)
        f = build_annihilator(2.0, f2, SMALL)
        assert abs(f.info["source_mass"]) < 1e-12
        assert abs(f.f1.mass) < 1e-10


def test_necsuf_on_construction(small_hat):
    res = check_necsuf(small_hat)
    assert tuple(res) == (True, True)
    assert res.residual_i <= 10 * SMALL.neumann_tol


def test_necsuf_invariant_density_without_far_field(psi0_beta2):
    f = with_far_field(psi0_beta2, zero_far_field(psi0_beta2.spec))
    assert tuple(check_necsuf(f)) == (True, False)


def test_psi_zero_structure(psi0_beta2):
    assert all(np.all(g.values == 0) for g in psi0_beta2.f2)
    assert psi0_beta2.f1.mass == pytest.approx(1.0, abs=1e-12)
    assert not psi0_beta2.f3.is_zero


def test_far_field_inverse_square_decay(small_hat):
    P = small_hat.parameter
    y = np.concatenate([np.geomspace(2 * P, 1e3 * P, 300), -np.geomspace(2 * P, 1e3 * P, 300)])
    env = np.abs(small_hat.f3(y)) * y**2
    assert np.max(env) < 10 * small_hat.near().sup_norm() * P**2


def test_total_mass_row_is_zero(two_sided_family):
    for f in two_sided_family.values():
        rep = verify_annihilation(f, 0)
        assert abs(rep.family_x[0]) < 1e-6


def test_left_indicator_annihilator():
    f = build_annihilator(2.0, f2_shape("indicator-left", 2.0))
    assert verify_annihilation(f, 20).max_residual < 1e-6


def test_annihilators_verify(two_sided_family, half_line_hat, psi0_beta2):
    for f in two_sided_family.values():
        assert verify_annihilation(f, 20).max_residual < 1e-6
    assert verify_annihilation_plus(half_line_hat, 20).max_residual < 1e-6
    assert verify_annihilation(psi0_beta2, 20).max_residual < 1e-6


def test_transported_half_line_element(half_line_hat):
    assert verify_transported(half_line_hat, 20).max_residual < 1e-6
    with pytest.raises(ValueError):
        verify_transported(build_annihilator(2.0, zero, SMALL))


def test_non_annihilator_is_detected(small_hat):
    crippled = with_far_field(small_hat, zero_far_field(small_hat.spec))
    assert verify_annihilation(crippled, 5).max_residual > 1e-3


def test_gram_rank(two_sided_family):
    fs = [two_sided_family[name] for name in F2_SHAPES[:5]]
    G = gram_matrix(fs)
    assert np.allclose(G, G.T.conj())
    assert numerical_rank(G) == 5


def test_weighted_norm_finite_and_cauchy(two_sided_family, half_line_hat):
    for f in [*two_sided_family.values(), half_line_hat]:
        w = weighted_l2_norm(f)
        assert math.isfinite(w.total) and w.total > 0
        inc = w.cauchy_increments()
        assert inc[-1] < inc[0]
        assert w.tail_bound < 0.1 * w.total
