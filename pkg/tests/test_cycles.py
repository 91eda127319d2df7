import numpy as np
import pytest
from hypothesis import given, strategies as st

from oneres.basins import BasinParams, find_R0
from oneres.cycles import (basin_permutation_check, classify_product, composition_consistency,
                           iterate_coefficients, iterate_product, make_root_germ, product_extension,
                           verify_root)
from oneres.errors import NotADivisor, PreconditionError
from oneres.germs import make_multipliers, make_normal_form
from oneres.orbits import classify_batch


def nf(k, d=2):
    return make_normal_form(make_multipliers(d, k=k), k)


def test_k2_p2_constants():
    root = make_root_germ(nf(2), 2)
    assert root.a == pytest.approx(-1 / 8, abs=1e-16)
    assert root.b == pytest.approx(-5 / 128, abs=1e-16)
    s = np.sqrt(2)
    assert np.allclose(root.mus, [np.exp(1j * np.pi * s), np.exp(-1j * np.pi * s + 1j * np.pi)])
    assert np.allclose(root.mus ** 2, root.base.lambdas, atol=1e-14)
    assert np.prod(root.mus) == pytest.approx(-1, abs=1e-14)


def test_p1_is_the_normal_form():
    base = nf(2)
    root = make_root_germ(base, 1)
    assert root.a == pytest.approx(-1 / 4) and root.b == 0
    assert verify_root(root)["max_deviation"] == 0
    z = np.array([0.03 + 0.02j, -0.01 + 0.04j])
    assert np.allclose(root(z), base.series(2 * 2 * 2)(z), atol=1e-16)


def test_not_a_divisor_and_tail():
    with pytest.raises(NotADivisor):
        make_root_germ(nf(2), 3)
    with pytest.raises(NotADivisor):
        make_root_germ(nf(3), 2)


def test_root_rejects_perturbed(perturbed33):
    with pytest.raises(PreconditionError):
        make_root_germ(perturbed33, 1)


def test_square_matches_through_degree_11():
    rep = verify_root(make_root_germ(nf(2), 2))
    assert rep["degree"] == 11
    assert rep["max_deviation"] < 1e-12
    mu_err, prod_err = rep["constraint_errors"]
    assert mu_err < 1e-14 and prod_err < 1e-14


def test_square_differs_at_next_resonant_degree():
    # first term beyond the claim is z_j u^{3k}, total degree 3kd + 1
    root = make_root_germ(nf(2), 2)
    assert verify_root(root, 12)["max_deviation"] < 1e-12
    assert verify_root(root, 13)["max_deviation"] > 1e-6


@pytest.mark.parametrize("k,p", [(2, 2), (4, 2), (4, 4), (3, 3), (6, 2)])
def test_intermediate_coefficients(k, p):
    root = make_root_germ(nf(k), p)
    for m in (2, 3):
        rep = iterate_coefficients(root, m)
        assert rep["a_error"] < 1e-13 and rep["b_error"] < 1e-13


def test_third_denominator_is_wrong():
    root = make_root_germ(nf(2), 2)
    rep = iterate_coefficients(root, 3)
    a, b, kd = root.a, root.b, 4
    third = 3 * b + 3 * 2 / 3 * a * a * (kd + 1)
    assert min(abs(x - third) for x in rep["b_measured"]) > 1e-3


@given(st.sampled_from([(1, 1, 2), (2, 1, 2), (2, 2, 2), (3, 3, 2), (4, 2, 2), (4, 4, 2),
                        (1, 1, 3)]))
def test_root_constraints(kpd):
    k, p, d = kpd
    root = make_root_germ(nf(k, d), p)
    mu_err, prod_err = root.constraint_errors()
    assert mu_err < 1e-14 and prod_err < 1e-14
    assert composition_consistency(root, n=100, radius=1e-2) < 1e-10


@pytest.mark.parametrize("k,p,expected", [(2, 2, [(0, 1)]), (2, 1, [(0,), (1,)]),
                                          (4, 2, [(0, 2), (1, 3)]), (4, 4, [(0, 1, 2, 3)])])
def test_basin_permutation(k, p, expected):
    base = nf(k)
    theta = 0.9 * np.pi / (2 * k) if k > 2 else 0.3
    cert = find_R0(base, theta, 0.4, samples=2048)
    params = BasinParams(2, k, 0, cert.R0, theta, 0.4)
    rep = basin_permutation_check(make_root_germ(base, p), params, samples=1000)
    assert rep["matches"]
    assert rep["cycles"] == expected
    assert all(len(c) == p for c in rep["cycles"])


def test_product_extension(nf2):
    with pytest.raises(PreconditionError):
        product_extension(nf2, 0)
    prod = product_extension(nf2, 2)
    zw = np.array([0.05, 0.05, 0.3, -0.7j])
    out = iterate_product(prod, zw, 40)
    assert np.array_equal(out[2:], zw[2:] * 2.0 ** -40)
    s = prod.series(4)
    assert np.allclose(s(zw[None])[0], prod(zw))


def test_product_classification(nf2):
    cert = find_R0(nf2, 0.3, 0.4, samples=2048)
    params = BasinParams(2, 1, 0, cert.R0, 0.3, 0.4)
    rng = np.random.default_rng(2)
    Z = np.vstack([[0.05, 0.05], [0, 0.05], [0.5, 0.5], 0.05 * np.exp(0.1 * rng.standard_normal((20, 2)))])
    W = rng.standard_normal((len(Z), 1))
    kind, index, first, wmax = classify_product(product_extension(nf2, 1), np.hstack([Z, W]), 0.2, 20_000,
                                                params)
    k2, i2, _ = classify_batch(nf2, Z, 0.2, 20_000, params)
    assert np.array_equal(kind, k2) and np.array_equal(index, i2)
    assert wmax < 1e-300 or wmax == 0
