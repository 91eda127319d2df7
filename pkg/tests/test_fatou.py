import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from oneres.basins import BasinParams, basin_codes, find_R0, sample_basin
from oneres.errors import NeverEntersBasin, NotInBasin, PreconditionError
from oneres.fatou import (CylinderPoint, check_injectivity, cylinder_batch, cylinder_conjugation,
                          cylinder_samples, expansion, fatou_batch, fatou_constant, fatou_psi,
                          fatou_sigma, global_coordinate, global_coordinate_batch, sigma_raw, tau)
from oneres.germs import evaluate
from oneres.orbits import run_orbits


@pytest.fixture(scope="module")
def params(nf2):
    cert = find_R0(nf2, 0.3, 0.4, samples=4096)
    return BasinParams(2, 1, 0, 2 * cert.R0, 0.3, 0.4)


@pytest.mark.parametrize("k,d", [(1, 2), (2, 2), (1, 3), (3, 2)])
def test_constant_against_symbolic_drift(k, d):
    # U_{n+1} - U_n = 1 + ((K+1)/(2K)) / U + ..., with U -> U (1 - 1/(K U))^{-K}
    K = k * d
    X = sp.symbols("X")
    drift = sp.series((1 - X / K) ** (-K) / X - 1 / X, X, 0, 3).removeO()
    assert sp.nsimplify(drift.coeff(X, 0)) == 1
    assert fatou_constant(k, d) == pytest.approx(-float(drift.coeff(X, 1)), abs=1e-15)
    assert expansion(k, d).defect < 1e-12


def test_constant_against_regression(nf2):
    # U_n - n = const - c log U_n + O(log U / U); fit with the correction columns
    ns = np.arange(10_000, 100_001, 500)
    ck, st_, _, _, _ = run_orbits(nf2, [[0.05, 0.05]], 100_000, retain=ns)
    sel = np.isin(ck, ns)
    U = (np.prod(st_[sel, 0], axis=1) ** -1).real
    n = ck[sel].astype(float)
    L = np.log(U)
    A = np.column_stack([np.ones_like(U), L, 1 / U, L / U])
    coef = np.linalg.lstsq(A, U - n, rcond=None)[0]
    assert abs(coef[1] - 0.75) < 1e-3
    assert fatou_constant(1, 2) == -0.75


def test_abel_tail_free_point(nf2):
    z = np.array([0.01, 0.01])
    a = fatou_psi(nf2, z)
    b = fatou_psi(nf2, evaluate(nf2, z))
    assert abs(b.value - a.value - 1) < 1e-8
    assert a.value.real > 0 and a.est_error < 1e-10
    assert a.branch["log"] == "principal" and a.branch["min_re_U"] > 0


def test_psi_against_plain_approximants(nf2):
    # independent route: psi_n = U_n - n + c log U_n converges like log(U)/U
    z = [[0.01, 0.01]]
    psi = fatou_psi(nf2, z[0]).value
    ck, st_, _, _, _ = run_orbits(nf2, z, 100_000, retain=[0, 1000, 10_000, 100_000])
    errs = []
    for c, n in enumerate(ck):
        U = np.prod(st_[c, 0]) ** -1
        errs.append(abs(U - n - 0.75 * np.log(U) - psi))
    assert errs[-1] < 1e-5
    assert errs[0] > errs[1] > errs[2]


def test_psi_asymptotic_to_U(nf2, params):
    Z = sample_basin(params, 200, seed=3, depth=8)
    U = np.prod(Z, axis=1) ** -1
    deep = U.real > 1e4
    assert deep.sum() > 10
    b = fatou_batch(nf2, Z[deep], params=params)
    assert np.max(np.abs(b.psi / U[deep] - 1)) < 0.01
    assert np.all(b.psi.real > 0)


def test_plain_increments_are_cauchy(nf2):
    z = np.array([0.1, 0.1])
    ck, st_, _, _, _ = run_orbits(nf2, [z], 2000, retain=np.arange(2001))
    U = np.prod(st_[:, 0], axis=1) ** -1
    psi_n = U - ck - 0.75 * np.log(U)
    inc = np.abs(np.diff(psi_n))[5:]
    assert np.all(np.diff(inc) < 0)


def test_abel_residual_shrinks_with_U(nf2, params):
    Z = sample_basin(params, 400, seed=11, depth=6)
    b0 = fatou_batch(nf2, Z, params=params)
    b1 = fatou_batch(nf2, evaluate(nf2, Z))
    U = np.abs(np.prod(Z, axis=1) ** -1)
    res = np.abs(b1.psi - b0.psi - 1)
    assert res.max() < 1e-8
    # raw first approximant residual decays like 1/U
    raw0 = U - 0.75 * np.log(U)
    U1 = np.abs(np.prod(evaluate(nf2, Z), axis=1) ** -1)
    raw = np.abs(U1 - 0.75 * np.log(U1) - raw0 - 1)
    lo, hi = U < np.median(U), U >= np.median(U)
    assert raw[hi].max() < raw[lo].max()


def test_sigma_and_tau_equations(nf2, params):
    Z = sample_basin(params, 100, seed=5)
    b0 = fatou_batch(nf2, Z, params=params)
    b1 = fatou_batch(nf2, evaluate(nf2, Z))
    lam = nf2.lambdas
    fac = (b0.psi / (b0.psi + 1)) ** (1 / nf2.K)
    for j in range(2):
        assert np.max(np.abs(b1.sigma[:, j] - lam[j] * b0.sigma[:, j] * fac)) < 1e-7
        assert np.max(np.abs(b1.tau[:, j] - lam[j] * b0.tau[:, j])) < 1e-7
    assert np.allclose(np.abs(b0.tau), np.abs(b0.psi[:, None]) ** (1 / nf2.K) * np.abs(b0.sigma),
                       rtol=1e-13)


def test_single_point_wrappers(nf2):
    z = [0.01, 0.012]
    s2 = fatou_sigma(nf2, z, 2)
    t2 = tau(nf2, z, 2)
    p = fatou_psi(nf2, z)
    assert t2.value == pytest.approx(p.value ** 0.5 * s2.value, rel=1e-14)
    with pytest.raises(PreconditionError):
        fatou_sigma(nf2, z, 3)


def test_tau_constant_along_orbit(nf2):
    z = np.array([0.05, 0.05])
    pts = [z]
    for _ in range(1000):
        pts.append(evaluate(nf2, pts[-1]))
    pts = np.array(pts)[::50]
    n = np.arange(0, 1001, 50)
    b = fatou_batch(nf2, pts)
    vals = nf2.lambdas[1] ** (-n.astype(float)) * b.tau[:, 1]
    assert np.max(np.abs(vals - vals[0])) < 1e-6


def test_sigma_close_to_coordinate(nf2):
    rs = np.array([1e-2, 1e-3, 1e-4])
    errs = [abs(fatou_sigma(nf2, [r, r], 2).value - r) for r in rs]
    slope = np.polyfit(np.log(rs), np.log(errs), 1)[0]
    assert slope > 2 * (1 - 0.4)


def test_raw_sigma_converges(nf2):
    z = [0.05, 0.05]
    p = fatou_psi(nf2, z).value
    raw = sigma_raw(nf2, z, 2, 2000, p)
    inc = np.abs(np.diff(raw))
    assert inc[-1] < inc[10]
    assert abs(raw[-1] - fatou_sigma(nf2, z, 2).value) < 1e-3


def test_not_in_basin(nf2, params):
    with pytest.raises(NotInBasin):
        fatou_psi(nf2, [0.0, 0.05])
    with pytest.raises(NotInBasin):
        fatou_batch(nf2, [[0.05, -0.05]], params=params)


def test_k2_abel(nf2k2):
    p = BasinParams(2, 2, 0, 4.0, 0.3, 0.4)
    Z = np.vstack([sample_basin(p.with_h(h), 100, seed=h) for h in range(2)])
    b0 = fatou_batch(nf2k2, Z)
    b1 = fatou_batch(nf2k2, evaluate(nf2k2, Z))
    assert np.max(np.abs(b1.psi - b0.psi - 1)) < 1e-8
    assert set(b0.h.tolist()) == {0, 1}


def test_injectivity(nf2, params):
    rep = check_injectivity(nf2, params, grid=300)
    assert rep["min_output_distance"] > 1e-6
    assert abs(rep["jacobian_det"][1e-3] - 1) < 0.1
    assert rep["preimage_residual"] < 1e-10
    assert rep["preimage_in_basin"]


def test_global_coordinate(nf2, params):
    z = np.array([0.1, 0.1 * np.exp(0.5j)])
    assert basin_codes(z[None], params)[0] != 0
    v0, n0 = global_coordinate_batch(nf2, [z], params)
    v5, _ = global_coordinate_batch(nf2, [z], params, extra=5)
    assert n0[0] > 0
    assert np.max(np.abs(v0 - v5)) < 1e-6
    w = sample_basin(params, 4, seed=2)
    g, n = global_coordinate_batch(nf2, w, params)
    b = fatou_batch(nf2, w)
    assert np.all(n == 0)
    assert np.allclose(g, np.column_stack([b.psi, b.tau[:, 1:]]), rtol=1e-14)
    with pytest.raises(NeverEntersBasin):
        global_coordinate(nf2, [0.0, 0.1], params, n_enter=50)


def test_cylinder_conjugation_examples(mult2):
    xi = (0.3 + 0.1j,)
    p0 = cylinder_conjugation(CylinderPoint(0, xi), mult2)
    assert p0.xi == xi
    p1 = cylinder_conjugation(CylinderPoint(1, xi), mult2)
    assert p1.xi[0] == pytest.approx(xi[0] / mult2.lambdas[1], abs=1e-15)
    back = cylinder_conjugation(p1, mult2, "backward")
    assert back.xi[0] == pytest.approx(xi[0], abs=1e-15)
    with pytest.raises(PreconditionError):
        CylinderPoint(0, (0j,))


@given(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
       st.complex_numbers(min_magnitude=0.1, max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_cylinder_intertwining(zeta, xi):
    from oneres.germs import make_multipliers
    mult = make_multipliers(2)
    a = cylinder_batch(np.array([[zeta, xi]]), mult)
    b = cylinder_batch(np.array([[zeta + 1, mult.lambdas[1] * xi]]), mult)
    assert abs(b[0, 1] - a[0, 1]) < 1e-12 * max(1, abs(a[0, 1]))


def test_cylinder_model_translation(nf2, params):
    Z = cylinder_samples(nf2, params, 100, seed=9)
    e0, _ = global_coordinate_batch(nf2, Z, params)
    e1, _ = global_coordinate_batch(nf2, evaluate(nf2, Z), params)
    m0, m1 = cylinder_batch(e0, nf2.multipliers), cylinder_batch(e1, nf2.multipliers)
    diff = m1 - m0
    diff[:, 0] -= 1
    assert np.abs(diff).max() < 1e-6
