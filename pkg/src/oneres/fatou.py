"""Fatou coordinate psi, the transversal coordinates sigma_j, tau_j, and the cylinder model.

For the normal form the resonant coordinate U = u^{-k} evolves exactly by
U -> g(U) = U (1 - 1/(K U))^{-K} with K = kd.  We build formal solutions in
X = 1/U and L = log U of

    psi(g(U)) = psi(U) + 1,            psi = U + c L + sum_m X^m P_m(L)
    T(U) - T(g(U)) = phi(U),           T   = sum_m X^m Q_m(L)

where phi is the per-step log-increment of sigma_{j,n}.  Then
psi(z) = psi_asym(U_n) - n and sigma_j(z) = sigma_{j,n}(z) exp(T(U_n)) once
|U_n| is large; the remaining error is O(|U_n|^{-M-1} log^M) for the normal
form and is driven by the tail for perturbed germs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from .basins import BasinParams, basin_codes, sample_basin
from .errors import NeverEntersBasin, NoConvergence, NotInBasin, PreconditionError
from .germs import GermSpec, Multipliers, evaluate
from .orbits import _kernel_args

ORDER = 6


def binom(e, p):
    """Generalised binomial coefficients C(e, p) for integer arrays p >= 0."""
    p = np.atleast_1d(p)
    out = np.empty(p.shape)
    for i, n in enumerate(p.ravel()):
        out.ravel()[i] = math.prod((e - t) / (t + 1) for t in range(int(n)))
    return out if out.size > 1 else float(out[0])


U_SWITCH = 1e3


def fatou_constant(k: int, d: int) -> float:
    K = k * d
    return -(K + 1) / (2 * K)


# bivariate series in X and L: arrays a[p, q] for X^p L^q -----------------------------

class _Alg:
    def __init__(self, K: int, M: int):
        self.K, self.M = K, M
        self.P = M + 2  # highest X power kept
        self.Q = 2 * M + 4  # highest L power kept

    def zeros(self):
        return np.zeros((self.P + 1, self.Q + 1))

    def mul(self, a, b):
        out = self.zeros()
        for p in range(self.P + 1):
            for q in range(self.Q + 1):
                if a[p, q] == 0:
                    continue
                out[p:, q:] += a[p, q] * b[: self.P + 1 - p, : self.Q + 1 - q]
        return out

    def xseries(self, coeffs):
        a = self.zeros()
        n = min(len(coeffs), self.P + 1)
        a[:n, 0] = coeffs[:n]
        return a

    def pow1m(self, e):
        """(1 - X/K)^e as an X-series."""
        p = np.arange(self.P + 2)
        return binom(e, p) * (-1.0 / self.K) ** p

    def log1m(self):
        """log(1 - X/K)"""
        c = np.zeros(self.P + 2)
        for p in range(1, self.P + 2):
            c[p] = -((1.0 / self.K) ** p) / p
        return c

    def shift_poly(self, poly, ell):
        """P(L + ell(X)) for a polynomial P in L and an X-series ell with ell(0) = 0."""
        out = self.zeros()
        ellp = [self.xseries(np.concatenate([[1.0], np.zeros(self.P)]))]
        E = self.xseries(ell)
        for _ in range(len(poly)):
            ellp.append(self.mul(ellp[-1], E))
        for q, cq in enumerate(poly):
            if cq == 0:
                continue
            for r in range(q + 1):
                out[:, q - r] += cq * binom(q, r) * ellp[r][:, 0]
        return out

    def D_term(self, m, poly):
        """X'^m P(L + ell) - X^m P(L) where X' = X (1 - X/K)^K."""
        ell = -self.K * self.log1m()
        xm = np.zeros(self.P + 2)
        pw = self.pow1m(self.K * m)
        if m <= self.P:
            xm[m:] = pw[: self.P + 2 - m]
        out = self.mul(self.xseries(xm), self.shift_poly(poly, ell))
        if m <= self.P:
            out[m, : len(poly)] -= poly[: self.Q + 1]
        return out

    def solve(self, Phi):
        """P_1..P_M with D[sum X^m P_m] = Phi + O(X^{M+2}); Phi must vanish below X^2."""
        polys = []
        acc = -Phi.copy()
        for m in range(1, self.M + 1):
            R = acc[m + 1].copy()
            # P' - m P = -R  =>  P = sum_t R^{(t)} / m^{t+1}
            P = np.zeros(self.Q + 1)
            deriv = R.copy()
            t = 0
            while np.any(deriv != 0):
                P[: len(deriv)] += deriv / m ** (t + 1)
                deriv = np.array([i * deriv[i] for i in range(1, len(deriv))]) if len(deriv) > 1 else np.zeros(0)
                t += 1
                if len(deriv) == 0:
                    break
            P = np.trim_zeros(P, "b")
            polys.append(P)
            if len(P):
                acc = acc + self.D_term(m, P)
        return polys, acc


@dataclass(frozen=True)
class Expansion:
    K: int
    M: int
    c: float
    psi_polys: tuple  # P_1..P_M, coefficient arrays in L
    tail_polys: tuple  # Q_1..Q_M
    defect: float  # size of the neglected order in the Abel identity

    def psi(self, U):
        U = np.asarray(U, dtype=complex)
        L = np.log(U)
        X = 1.0 / U
        out = U + self.c * L
        Xm = np.ones_like(U)
        for P in self.psi_polys:
            Xm = Xm * X
            if len(P):
                out = out + Xm * np.polyval(P[::-1], L)
        return out

    def tail(self, U):
        U = np.asarray(U, dtype=complex)
        L = np.log(U)
        X = 1.0 / U
        out = np.zeros_like(U)
        Xm = np.ones_like(U)
        for Q in self.tail_polys:
            Xm = Xm * X
            if len(Q):
                out = out + Xm * np.polyval(Q[::-1], L)
        return out


@lru_cache(maxsize=None)
def expansion(k: int, d: int, M: int = ORDER) -> Expansion:
    K = k * d
    alg = _Alg(K, M)
    c = fatou_constant(k, d)
    # D[U] = X^{-1}((1 - X/K)^{-K} - 1), D[cL] = c ell
    g = alg.pow1m(-K)
    DU = np.zeros(alg.P + 2)
    DU[: alg.P + 1] = g[1: alg.P + 2]
    Dl = -c * K * alg.log1m()
    Phi = alg.xseries(-DU - Dl)
    Phi[0, 0] += 1.0
    if abs(Phi[0, 0]) > 1e-12 or np.abs(Phi[1]).max() > 1e-12:
        raise AssertionError("Fatou constant does not cancel the first-order drift")
    psi_polys, defect = alg.solve(Phi)

    # V = c X L + sum_m X^{m+1} P_m(L), 1/psi = X / (1 + V)
    V = alg.zeros()
    V[1, 1] = c
    for m, P in enumerate(psi_polys, start=1):
        if m + 1 <= alg.P and len(P):
            V[m + 1, : len(P)] += P[: alg.Q + 1]
    inv = alg.zeros()
    inv[0, 0] = 1.0
    term = inv.copy()
    for _ in range(alg.P):
        term = -alg.mul(term, V)
        inv = inv + term
    W = alg.mul(alg.xseries(np.array([0.0, 1.0])), inv)
    logW = alg.zeros()
    term = W.copy()
    for n in range(1, alg.P + 1):
        logW = logW + ((-1) ** (n + 1) / n) * term
        term = alg.mul(term, W)
    phi = alg.xseries(alg.log1m()) + logW / K
    if np.abs(phi[:2]).max() > 1e-12:
        raise AssertionError("sigma increment is not second order")
    tail_polys, tdefect = alg.solve(-phi)
    err = float(max(np.abs(defect[: M + 2]).max(), np.abs(tdefect[: M + 2]).max()))
    return Expansion(K, M, c, tuple(psi_polys), tuple(tail_polys), err)


# evaluation ------------------------------------------------------------------------

@dataclass
class FatouEvaluation:
    value: complex
    depth: int
    est_error: float
    branch: dict = field(default_factory=dict)


@dataclass
class FatouBatch:
    psi: np.ndarray  # (N,)
    sigma: np.ndarray  # (N, d); column 0 holds sigma_1
    tau: np.ndarray  # (N, d)
    depth: np.ndarray
    psi_error: np.ndarray
    sigma_error: np.ndarray
    h: np.ndarray
    min_re_U: np.ndarray
    min_re_psi: np.ndarray


def sector_of(u, k: int) -> np.ndarray:
    return np.mod(np.round(np.angle(u) * k / (2 * np.pi)).astype(int), k)


def _lambda_pow(mult: Multipliers, n: np.ndarray, sign: int = -1) -> np.ndarray:
    """lambda_j^{sign * n} through the angles, shape (N, d)."""
    th = np.asarray(mult.angles)
    ph = np.mod(np.outer(n, th), 1.0)
    return np.exp(sign * 2j * np.pi * ph)


@njit(cache=True)
def _psi_kernel(Z0, lam, k, K, exps, comps, coefs, c, polys, n_max, tol, u_switch, tailfree):
    """Per orbit: iterate until |U_n| >= u_switch and psi_asym(U_n) - n has settled."""
    N, d = Z0.shape
    M, Q = polys.shape
    T = exps.shape[0]
    cur = np.empty((N, d), dtype=np.complex128)
    prev = np.empty((N, d), dtype=np.complex128)
    depth = np.zeros(N, dtype=np.int64)
    inc_out = np.full(N, np.inf)
    best_out = np.full(N, np.inf)
    minU = np.full(N, np.inf)
    minpsi = np.full(N, np.inf)
    ok_out = np.zeros(N, dtype=np.bool_)
    bad = np.zeros(N, dtype=np.bool_)
    z = np.empty(d, dtype=np.complex128)
    zp = np.empty(d, dtype=np.complex128)
    w = np.empty(d, dtype=np.complex128)
    for i in range(N):
        for j in range(d):
            z[j] = Z0[i, j]
            zp[j] = Z0[i, j]
        n = 0
        inc = np.inf
        pinc = np.inf
        best = np.inf
        pps = 0j
        ok = False
        while True:
            u = 1.0 + 0.0j
            for j in range(d):
                u *= z[j]
            uk = u
            for _ in range(k - 1):
                uk *= u
            U = 1.0 / uk
            if U.real < minU[i]:
                minU[i] = U.real
            if not U.real > 0:
                bad[i] = True
                break
            L = np.log(U)
            X = 1.0 / U
            ps = U + c * L
            Xm = 1.0 + 0.0j
            for m in range(M):
                Xm *= X
                acc = 0j
                for q in range(Q - 1, -1, -1):
                    acc = acc * L + polys[m, q]
                ps += Xm * acc
            ps -= n
            if ps.real < minpsi[i]:
                minpsi[i] = ps.real
            if n > 0:
                pinc = inc
                inc = abs(ps - pps)
                if inc < best:
                    best = inc
            pps = ps
            big = abs(U) >= u_switch
            ok = big and ((tailfree and n > 0) or (inc < tol and pinc < tol))
            if ok or n >= n_max:
                break
            for j in range(d):
                zp[j] = z[j]
            f = 1.0 - uk / K
            for j in range(d):
                w[j] = lam[j] * z[j] * f
            for t in range(T):
                mono = coefs[t]
                for j in range(d):
                    for _ in range(exps[t, j]):
                        mono *= z[j]
                w[comps[t]] += mono
            for j in range(d):
                z[j] = w[j]
            n += 1
        for j in range(d):
            cur[i, j] = z[j]
            prev[i, j] = zp[j]
        depth[i] = n
        inc_out[i] = inc
        best_out[i] = best
        ok_out[i] = ok
    return cur, prev, depth, inc_out, best_out, minU, minpsi, ok_out, bad


def fatou_batch(germ: GermSpec, Z, n_max: int = 100_000, tol: float = 1e-12,
                params: BasinParams | None = None, u_switch: float = U_SWITCH,
                order: int = ORDER) -> FatouBatch:
    """psi, sigma_1..sigma_d and tau_j at many points.

    Each orbit is iterated until |U_n| >= u_switch and two consecutive
    increments of psi_asym(U_n) - n are below ``tol`` (or n_max).
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    N, d, k, K = len(Z), germ.d, germ.k, germ.K
    ex = expansion(k, d, order)
    u0 = np.prod(Z, axis=1)
    if np.any(u0 == 0):
        raise NotInBasin("u = 0 at some point")
    if params is not None:
        hs = sector_of(u0, k)
        for h in range(k):
            sel = hs == h
            if sel.any() and np.any(basin_codes(Z[sel], params.with_h(h)) != 0):
                raise NotInBasin("some points are outside the certified basin")
    h = sector_of(u0, k)

    polys = np.zeros((ex.M, max(len(P) for P in ex.psi_polys)))
    for m, P in enumerate(ex.psi_polys):
        polys[m, : len(P)] = P
    lam, kk, KK, exps, comps, coefs = _kernel_args(germ)
    cur, prev_state, n_arr, inc, best_inc, min_re_U, min_re_psi, ok, bad = _psi_kernel(
        np.ascontiguousarray(Z), lam, kk, KK, exps, comps, coefs, ex.c, polys,
        int(n_max), float(tol), float(u_switch), not germ.tail.coefficients)
    if bad.any():
        raise NotInBasin("orbit left the right half-plane in U; principal log undefined")
    stuck = ~ok & (inc >= tol) & (inc > 2 * best_inc)
    if stuck.any():
        raise NoConvergence(f"psi increments stopped decreasing for {int(stuck.sum())} points")

    # psi(z) and sigma_j at the final depth
    U_f = np.prod(cur, axis=1) ** (-k)
    psi = ex.psi(U_f) - n_arr
    if np.any(psi.real <= 0):
        raise NotInBasin("Re psi <= 0")
    root = ((psi + n_arr) / psi) ** (1.0 / K)
    lam_n = _lambda_pow(germ.multipliers, n_arr, -1)
    corr = np.exp(ex.tail(U_f))
    sigma = lam_n * cur * (root * corr)[:, None]
    # same at depth n-1 for the error estimate
    prv = prev_state
    n_prev = np.maximum(n_arr - 1, 0)
    U_p = np.prod(prv, axis=1) ** (-k)
    root_p = ((psi + n_prev) / psi) ** (1.0 / K)
    sigma_p = _lambda_pow(germ.multipliers, n_prev, -1) * prv * (root_p * np.exp(ex.tail(U_p)))[:, None]
    sig_err = np.where(n_arr > 0, np.abs(sigma - sigma_p).max(axis=1), np.nan)

    # sigma_1 = e^{2 pi i h/k} (psi^{1/k} sigma_2 ... sigma_d)^{-1}
    sigma[:, 0] = np.exp(2j * np.pi * h / k) / (psi ** (1.0 / k) * np.prod(sigma[:, 1:], axis=1))
    tau = sigma * (psi ** (1.0 / K))[:, None]
    psi_err = np.where(np.isfinite(inc), inc, ex.defect)
    return FatouBatch(psi, sigma, tau, n_arr, psi_err, sig_err, h, min_re_U, min_re_psi)


def _branch(b: FatouBatch, i: int) -> dict:
    return {"log": "principal", "root": "principal", "sector": int(b.h[i]),
            "min_re_U": float(b.min_re_U[i]), "min_re_psi": float(b.min_re_psi[i])}


def fatou_psi(germ: GermSpec, z, n_max: int = 100_000, tol: float = 1e-12,
              params: BasinParams | None = None) -> FatouEvaluation:
    b = fatou_batch(germ, [z], n_max, tol, params)
    return FatouEvaluation(complex(b.psi[0]), int(b.depth[0]), float(b.psi_error[0]), _branch(b, 0))


def fatou_sigma(germ: GermSpec, z, j: int, n_max: int = 100_000, tol: float = 1e-12,
                params: BasinParams | None = None) -> FatouEvaluation:
    """sigma_j for j = 2..d (1-based); j = 1 gives the derived sigma_1."""
    if not 1 <= j <= germ.d:
        raise PreconditionError("j out of range")
    b = fatou_batch(germ, [z], n_max, tol, params)
    return FatouEvaluation(complex(b.sigma[0, j - 1]), int(b.depth[0]), float(b.sigma_error[0]),
                           _branch(b, 0))


def tau(germ: GermSpec, z, j: int, n_max: int = 100_000, tol: float = 1e-12,
        params: BasinParams | None = None) -> FatouEvaluation:
    if not 1 <= j <= germ.d:
        raise PreconditionError("j out of range")
    b = fatou_batch(germ, [z], n_max, tol, params)
    return FatouEvaluation(complex(b.tau[0, j - 1]), int(b.depth[0]), float(b.sigma_error[0]),
                           _branch(b, 0))


def sigma_raw(germ: GermSpec, z, j: int, n: int, psi: complex) -> np.ndarray:
    """The plain approximants sigma_{j,m}(z), m = 0..n, without tail correction."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(n + 1, dtype=complex)
    lam = germ.lambdas[j - 1]
    cur = z.copy()
    for m in range(n + 1):
        out[m] = lam ** (-m) * cur[j - 1] * ((psi + m) / psi) ** (1.0 / germ.K)
        cur = evaluate(germ, cur)
    return out


# injectivity and image ----------------------------------------------------------------

def _from_T(U, zp, k: int, h: int):
    """Point z with u^{-k} = U in sector h and given z^2..z^d."""
    U = np.asarray(U, dtype=complex)
    zp = np.atleast_2d(np.asarray(zp, dtype=complex))
    u = U ** (-1.0 / k) * np.exp(2j * np.pi * h / k)
    z1 = u / np.prod(zp, axis=1)
    return np.column_stack([z1, zp])


def phi_map(germ: GermSpec, Z, **kw) -> np.ndarray:
    """(psi, sigma_2, ..., sigma_d)"""
    b = fatou_batch(germ, Z, **kw)
    return np.column_stack([b.psi, b.sigma[:, 1:]])


def _jacobian_T(germ: GermSpec, U, zp, h: int, rel: float = 1e-5, **kw):
    d = germ.d
    w0 = np.concatenate([[U], zp]).astype(complex)
    J = np.empty((d, d), dtype=complex)
    for b in range(d):
        step = rel * abs(w0[b])
        wp, wm = w0.copy(), w0.copy()
        wp[b] += step
        wm[b] -= step
        pts = np.vstack([_from_T(wp[0], wp[1:], germ.k, h), _from_T(wm[0], wm[1:], germ.k, h)])
        vals = phi_map(germ, pts, **kw)
        J[:, b] = (vals[0] - vals[1]) / (2 * step)
    return J


def check_injectivity(germ: GermSpec, params: BasinParams, grid: int = 1000, seed: int = 0,
                      radii=(1e-2, 1e-3), target=None, **kw) -> dict:
    """Pairwise separation of phi on a sample of B_h, Jacobian at (r,...,r), and one preimage solve."""
    Z = sample_basin(params, grid, seed=seed)
    vals = phi_map(germ, Z, **kw)
    U, zp = np.prod(Z, axis=1) ** (-params.k), Z[:, 1:]
    ins = np.column_stack([U, zp])

    def normalised(A):
        return A / np.abs(A).max(axis=0, keepdims=True)

    out_n, in_n = normalised(vals), normalised(ins)
    min_out, min_ratio = math.inf, math.inf
    for i in range(len(Z) - 1):
        do = np.abs(out_n[i + 1:] - out_n[i]).max(axis=1)
        di = np.abs(in_n[i + 1:] - in_n[i]).max(axis=1)
        min_out = min(min_out, float(do.min()))
        min_ratio = min(min_ratio, float((do / di).min()))

    jac = {}
    d, k = germ.d, germ.k
    for r in radii:
        Ur = r ** (-k * d)
        J = _jacobian_T(germ, Ur, np.full(d - 1, r), 0, **kw)
        jac[r] = complex(np.linalg.det(J))

    # preimage of a target (U*, z'*) by Newton from the near-inverse (psi ~ U, sigma ~ z')
    if target is None:
        Ut = 4 * params.R * 1.5 + 0.3j * params.R
        zt = np.full(d - 1, abs(Ut) ** (-1.0 / (k * d)) * np.exp(0.4j))
        target = (Ut, zt)
    Ut, zt = target
    want = np.concatenate([[Ut], zt]).astype(complex)
    w = want.copy()
    resid = math.inf
    for _ in range(30):
        cur = phi_map(germ, _from_T(w[0], w[1:], k, params.h), **kw)[0]
        resid = float(np.abs(cur - want).max() / np.abs(want).max())
        if resid < 1e-12:
            break
        J = _jacobian_T(germ, w[0], w[1:], params.h, **kw)
        w = w - np.linalg.solve(J, cur - want)
    zsol = _from_T(w[0], w[1:], k, params.h)[0]
    return {"min_output_distance": min_out, "min_distance_ratio": min_ratio,
            "jacobian_det": jac, "preimage_residual": resid,
            "preimage_in_basin": bool(basin_codes(zsol[None, :], params)[0] == 0),
            "preimage": zsol}


# global coordinate and cylinder model ------------------------------------------------------

@dataclass(frozen=True)
class CylinderPoint:
    zeta: complex
    xi: tuple

    def __post_init__(self):
        if any(x == 0 for x in self.xi):
            raise PreconditionError("xi components must be nonzero")

    def as_array(self) -> np.ndarray:
        return np.array([self.zeta, *self.xi], dtype=complex)


def global_coordinate_batch(germ: GermSpec, Z, params: BasinParams, n_enter: int = 10_000,
                            extra: int = 0, **kw) -> tuple[np.ndarray, np.ndarray]:
    """phi_hat(z) = (psi(F^n z) - n, lambda_j^{-n} tau_j(F^n z)); n = first entry + extra.

    Returns (values[N, d], n used).
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    N = len(Z)
    cur = Z.copy()
    n_used = np.full(N, -1, dtype=np.int64)
    pars = [params.with_h(h) for h in range(germ.k)]
    for n in range(n_enter + 1):
        open_ = n_used < 0
        if not open_.any():
            break
        ins = np.zeros(N, dtype=bool)
        for p in pars:
            ins |= basin_codes(cur, p) == 0
        n_used[open_ & ins] = n
        still = n_used < 0
        if n < n_enter and still.any():
            cur[still] = evaluate(germ, cur[still])
    if np.any(n_used < 0):
        raise NeverEntersBasin(f"{int((n_used < 0).sum())} points did not enter within {n_enter} steps")
    for _ in range(extra):
        cur = evaluate(germ, cur)
    n_used = n_used + extra
    b = fatou_batch(germ, cur, **kw)
    lam_n = _lambda_pow(germ.multipliers, n_used, -1)
    vals = np.column_stack([b.psi - n_used, (lam_n * b.tau)[:, 1:]])
    return vals, n_used


def global_coordinate(germ: GermSpec, z, params: BasinParams, n_enter: int = 10_000,
                      extra: int = 0, **kw) -> CylinderPoint:
    vals, _ = global_coordinate_batch(germ, [z], params, n_enter, extra, **kw)
    return CylinderPoint(complex(vals[0, 0]), tuple(complex(x) for x in vals[0, 1:]))


def cylinder_conjugation(p: CylinderPoint, mult: Multipliers, direction: str = "forward") -> CylinderPoint:
    """eta(zeta, xi) = (zeta, exp(-zeta log lambda_j) xi_j), principal logs, j = 2..d."""
    logs = mult.log_lambdas[1:]
    sign = -1.0 if direction == "forward" else 1.0
    if direction not in ("forward", "backward"):
        raise PreconditionError("direction must be forward or backward")
    xi = np.asarray(p.xi, dtype=complex) * np.exp(sign * p.zeta * logs)
    return CylinderPoint(p.zeta, tuple(complex(x) for x in xi))


def cylinder_batch(vals: np.ndarray, mult: Multipliers, direction: str = "forward") -> np.ndarray:
    logs = mult.log_lambdas[1:]
    sign = -1.0 if direction == "forward" else 1.0
    out = vals.copy()
    out[:, 1:] = vals[:, 1:] * np.exp(sign * vals[:, :1] * logs[None, :])
    return out


def cylinder_samples(germ: GermSpec, params: BasinParams, n: int, seed=0, im_span: float = 1.0) -> np.ndarray:
    """Basin points with |Im U| <= im_span/2, where eta stays of order one.

    eta grows like exp(2 pi |theta_j| |Im zeta|), so absolute residuals are only
    meaningful on such points.
    """
    rng = np.random.default_rng(seed)
    d, k = germ.d, germ.k
    out = []
    while sum(len(x) for x in out) < n:
        U = params.R * (1.5 + 3.0 * rng.random(n)) + 1j * im_span * (rng.random(n) - 0.5)
        au = np.abs(U) ** (-1.0 / k)
        zp = np.empty((n, d - 1), dtype=complex)
        pre = np.ones(n)
        for j in range(2, d + 1):
            lo = np.log(au ** (1 - (d - j + 1) * params.beta) / pre)
            hi = params.beta * np.log(au)
            r = np.exp(lo + (hi - lo) * (0.05 + 0.9 * rng.random(n)))
            zp[:, j - 2] = r * np.exp(2j * np.pi * rng.random(n))
            pre = pre * r
        Z = _from_T(U, zp, k, params.h)
        out.append(Z[basin_codes(Z, params) == 0])
    return np.vstack(out)[:n]
