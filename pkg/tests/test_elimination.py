import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from oneres.elimination import (ExponentSet, brjuno_omega, brjuno_partial_sums, check_condition1,
                                iterated_elimination, majorant_diagnostics, nicer_tail_preset,
                                resonant_correction,
                                sigma_closed_form_coeffs, sigma_sequence, solve_homological)
from oneres.errors import ConditionViolated, PreconditionError, ZeroDivisor
from oneres.germs import make_perturbed
from oneres.series import TruncatedSeriesMap, compose, invert, random_series
from oneres.suites import elimination_example, exhaustive_omega

SQ2 = math.sqrt(2)


def one_dim(D=6):
    lam = np.exp(2j * np.pi * SQ2)
    return lam, TruncatedSeriesMap.from_terms(1, D, [((1,), 0, lam), ((2,), 0, 1.0)])


def test_one_dim_first_coefficient():
    lam, F = one_dim()
    res = solve_homological(F, ExponentSet.low_order(1), ExponentSet.nonlinear(), 6)
    assert abs(res.H.coefficient((2,))[0] - 1 / (lam ** 2 - lam)) < 1e-14
    assert res.max_eliminated() == 0
    assert res.residual < 1e-12


def test_linear_map_is_fixed(mult2):
    F = TruncatedSeriesMap.linear(mult2.lambdas, 8)
    res = solve_homological(F, ExponentSet.low_order(1), ExponentSet(lambda a: sum(a) == 2, "deg2"), 8)
    assert res.H.nonlinear_part().max_abs() == 0
    assert res.G.nonlinear_part().max_abs() == 0


def test_degree_two_terms_vanish(mult2):
    F = TruncatedSeriesMap.linear(mult2.lambdas, 4) + TruncatedSeriesMap.from_terms(2, 4, [((2, 0), 0, 1.0)])
    A = ExponentSet(lambda a: sum(a) == 2, "deg2")
    res = solve_homological(F, ExponentSet.low_order(1), A, 4)
    assert res.G.degree_part(2).max_abs() < 1e-15
    assert np.allclose(res.H.linear_part(), np.eye(2))


def test_brjuno_one_dim_values():
    r = brjuno_omega([SQ2], ExponentSet.nonlinear(), 128)
    assert r.omega_values[0] == 1.0
    assert abs(abs(np.exp(2j * np.pi * 2 * SQ2) - np.exp(2j * np.pi * SQ2)) - 1.927) < 1e-3
    assert abs(r.omega_values[-1] - 2 * math.sin(math.pi * abs(70 * SQ2 - 99))) < 1e-12
    assert abs(r.omega_values[-1] - 0.0317) < 1e-4
    assert r.witnesses[-1] == ((71,), 0)


def test_brjuno_zero_divisor(mult2):
    with pytest.raises(ZeroDivisor):
        brjuno_omega(mult2, ExponentSet.nonlinear(), 8)
    with pytest.raises(PreconditionError):
        brjuno_omega(mult2, ExponentSet.level_set(1, 2), 1)


def test_brjuno_matches_dense_scan(mult2):
    A = ExponentSet.level_set(1, 2)
    r = brjuno_omega(mult2, A, 256)
    dense = exhaustive_omega(mult2.angles, A, 256)
    assert np.max(np.abs(r.omega_values - dense)) < 1e-12


def test_partial_sums_trivial_and_monotone(mult2):
    r = brjuno_omega(mult2, ExponentSet.empty(), 16)
    S, inc, _ = brjuno_partial_sums(r)
    assert np.all(S == 0)
    r = brjuno_omega(mult2, ExponentSet.level_set(1, 2), 256)
    S, inc, _ = brjuno_partial_sums(r)
    assert np.all(np.diff(S) >= 0) and np.all(inc >= 0)


def test_condition1_violation():
    with pytest.raises(ConditionViolated) as e:
        check_condition1(ExponentSet.low_order(1), ExponentSet(lambda a: sum(a) == 3, "d3"), 2, 4)
    assert e.value.condition == 1


def test_condition2_violation(mult2):
    # three copies of (2,0)e_1 sum to (6,0) with e_J = (3,0), both in A
    F = TruncatedSeriesMap.linear(mult2.lambdas, 6) + TruncatedSeriesMap.from_terms(2, 6, [((2, 0), 0, 1.0)])
    with pytest.raises(ConditionViolated) as e:
        solve_homological(F, ExponentSet.low_order(2), ExponentSet(lambda a: sum(a) >= 3, "hi"), 6)
    assert e.value.condition == 2


def test_elimination_preserves_A0_bitwise():
    germ, levels, A0 = elimination_example(seed=3, D=12)
    res = iterated_elimination(germ, levels, 12, A0=A0)
    F = germ.series(12)
    for a in A0.members(2, 12, 1):
        assert np.array_equal(res.G.coefficient(a), F.coefficient(a))
    assert res.max_eliminated() < 1e-10
    assert res.residual < 1e-9 * F.nonlinear_part().max_abs() / res.divisor_floor
    rng = np.random.default_rng(0)
    z = rng.standard_normal((100, 2)) + 1j * rng.standard_normal((100, 2))
    z *= 1e-2 * rng.random((100, 1)) / np.linalg.norm(z, axis=1, keepdims=True)
    assert res.pointwise_residual(z).max() < 1e-8
    assert np.allclose(res.H.linear_part(), np.eye(2))


def test_single_level_equals_solver():
    germ, levels, A0 = elimination_example(seed=4, D=10)
    a = iterated_elimination(germ, levels[:1], 10, A0=A0)
    b = solve_homological(germ, A0, levels[0], 10)
    assert (a.G - b.G).max_abs() < 1e-12
    assert (a.H - b.H).max_abs() < 1e-12


def test_tail_free_is_fixed(nf2):
    germ, levels, A0 = elimination_example(D=10)
    res = iterated_elimination(nf2, levels, 10, A0=A0)
    assert (res.H - TruncatedSeriesMap.identity(2, 10)).max_abs() == 0


def test_nicer_tail_examples(nf2, perturbed33):
    res = nicer_tail_preset(perturbed33, 14)
    assert np.abs(res.G.coefficient((3, 3))).max() < 1e-10
    assert not res.survivors
    tail = TruncatedSeriesMap.from_terms(2, 12, [((6, 6), 0, 1e-2)])
    g = make_perturbed(nf2, tail, 6)
    res = nicer_tail_preset(g, 14)
    assert abs(res.G.coefficient((6, 6))[0] - 1e-2) < 1e-14
    empty = make_perturbed(nf2, TruncatedSeriesMap.zero(2, 6), 6)
    res = nicer_tail_preset(empty, 12)
    assert (res.G - nf2.normal_form_series(12)).max_abs() < 1e-14


@pytest.mark.parametrize("q", [3, 4, 5])
def test_resonant_correction_cancels(nf2, q):
    rng = np.random.default_rng(q)
    c = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    tail = TruncatedSeriesMap.from_terms(2, 13, [((q + 1, q), 0, c[0]), ((q, q + 1), 1, c[1])])
    g = make_perturbed(nf2, tail, 6)
    G = g.series(13)
    h = resonant_correction(G, g.lambdas, 1, q, 13)
    G2 = compose(invert(h, 13), compose(G, h, 13), 13)
    assert abs(G2.coefficient((q + 1, q))[0] - nf2.normal_form_series(13).coefficient((q + 1, q))[0]) < 1e-14
    assert abs(G2.coefficient((q, q + 1))[1]) < 1e-14
    # nothing below degree 1 + 2q moves
    assert (G2 - G).truncate(2 * q).max_abs() < 1e-15


def test_nicer_tail_removes_resonant_terms(nf2):
    tail = TruncatedSeriesMap.from_terms(2, 12, [((4, 3), 0, 1e-2), ((5, 4), 1, 2e-2), ((5, 5), 0, 1e-2)])
    res = nicer_tail_preset(make_perturbed(nf2, tail, 6), 14)
    assert not res.survivors
    assert res.residual < 1e-12


def test_sigma_small_values():
    for d in (1, 2, 3, 4):
        s = sigma_sequence(d, 3)
        assert s == [1, d, 2 * d * d + d]


def test_sigma_closed_form_against_sympy():
    t = sp.symbols("t")
    d = 2
    sig = (1 + t - sp.sqrt((1 + t) ** 2 - 4 * (d + 1) * t)) / (2 * (d + 1))
    ser = sp.series(sig, t, 0, 21).removeO()
    taylor = [int(ser.coeff(t, r)) for r in range(1, 21)]
    assert sigma_sequence(d, 20) == taylor
    closed = sigma_closed_form_coeffs(d, 20)
    assert np.max(np.abs(closed - np.array(taylor, float)) / np.array(taylor, float)) < 1e-10
    rep = majorant_diagnostics(d, 20)
    assert rep["sigma_rel_error"] < 1e-10


@given(st.integers(1, 4))
def test_sigma_generating_identity(d):
    # sigma - t - d sigma^2 / (1 - sigma) vanishes through order 20, exact integer arithmetic
    N = 20
    s = [0] + sigma_sequence(d, N)
    geo = [0] * (N + 1)  # sigma^2/(1-sigma) = sum_{k>=2} sigma^k
    pw = s[:]
    for _ in range(2, N + 1):
        pw = [sum(pw[a] * s[n - a] for a in range(n + 1)) for n in range(N + 1)]
        geo = [g + p for g, p in zip(geo, pw)]
    lhs = [s[n] - (1 if n == 1 else 0) - d * geo[n] for n in range(N + 1)]
    assert all(v == 0 for v in lhs)


@settings(max_examples=5)
@given(st.integers(0, 10_000))
def test_conjugation_identity_random_tails(seed):
    from oneres.germs import make_multipliers, make_normal_form
    base = make_normal_form(make_multipliers(2), 1)
    tail = random_series(np.random.default_rng(seed), 2, 8, min_degree=6, scale=1e-2)
    germ = make_perturbed(base, tail, 6)
    _, levels, A0 = elimination_example(D=10)
    res = iterated_elimination(germ, levels, 10, A0=A0)
    F = germ.series(10)
    assert res.residual < 1e-9 * F.nonlinear_part().max_abs() / res.divisor_floor
    assert res.max_eliminated() < 1e-10
