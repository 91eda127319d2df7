"""Local basins B_h(R, theta, beta), their U-coordinate image T, and sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .errors import EmptyAnnulus, PreconditionError, SearchExhausted
from .germs import GermSpec, evaluate

REASONS = ("in", "sector", "disk", "W")
T_REASONS = ("in", "H", "product", "W")


@dataclass(frozen=True)
class BasinParams:
    d: int
    k: int
    h: int
    R: float
    theta: float
    beta: float

    def __post_init__(self):
        if self.d < 2 or self.k < 1:
            raise PreconditionError("need d >= 2 and k >= 1")
        if not 0 <= self.h < self.k:
            raise PreconditionError(f"sector index h={self.h} outside 0..{self.k - 1}")
        if not self.R > 0:
            raise PreconditionError("R must be positive")
        if not 0 < self.theta < math.pi / (2 * self.k):
            raise PreconditionError(f"theta must lie in (0, pi/(2k)) = (0, {math.pi / (2 * self.k):.6g})")
        if not 0 < self.beta < 1 / self.d:
            raise PreconditionError(f"beta must lie in (0, 1/d) = (0, {1 / self.d:.6g})")

    def with_h(self, h: int) -> "BasinParams":
        return replace(self, h=h)

    @property
    def center(self) -> float:
        return 2 * math.pi * self.h / self.k


@dataclass(frozen=True)
class Verdict:
    inside: bool
    reason: str | None = None

    def __bool__(self):
        return self.inside


def _arg_offset(u, center, k):
    """arg u - center in (-pi, pi]; agrees with the (-pi/k, pi/k] representative wherever |.| < theta."""
    return np.angle(u * np.exp(-1j * center))


def basin_codes(z, p: BasinParams) -> np.ndarray:
    """Vectorised membership: 0 = in, 1 = sector, 2 = disk, 3 = W (first failed test)."""
    z = np.asarray(z, dtype=complex)
    u = np.prod(z, axis=-1)
    code = np.zeros(u.shape, dtype=np.int8)
    au = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        off = _arg_offset(u, p.center, p.k)
        bad_sector = (au == 0) | ~(np.abs(off) < p.theta)
        disk = np.abs(u ** p.k - 1 / (2 * p.R)) < 1 / (2 * p.R)
        bound = au ** p.beta
        w_ok = np.all(np.abs(z) < bound[..., None], axis=-1)
    code[~w_ok] = 3
    code[~disk] = 2
    code[bad_sector] = 1
    return code


def in_basin(z, p: BasinParams) -> Verdict:
    c = int(basin_codes(np.asarray(z)[None, :], p)[0])
    return Verdict(c == 0, None if c == 0 else REASONS[c])


def T_codes(U, zp, p: BasinParams) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    zp = np.asarray(zp, dtype=complex)
    aU = np.abs(U)
    code = np.zeros(U.shape, dtype=np.int8)
    with np.errstate(divide="ignore", invalid="ignore"):
        H_ok = (U.real > p.R) & (np.abs(np.angle(U)) < p.k * p.theta)
        prod_ok = aU ** ((p.beta - 1) / p.k) < np.abs(np.prod(zp, axis=-1))
        w_ok = np.max(np.abs(zp), axis=-1) < aU ** (-p.beta / p.k)
    code[~w_ok] = 3
    code[~prod_ok] = 2
    code[~H_ok] = 1
    return code


def in_T(U, zp, p: BasinParams) -> Verdict:
    c = int(T_codes(np.asarray([U]), np.asarray(zp)[None, :], p)[0])
    return Verdict(c == 0, None if c == 0 else T_REASONS[c])


def to_T(z, k: int):
    """(U, z') = (u^{-k}, z^2..z^d)"""
    z = np.asarray(z, dtype=complex)
    return np.prod(z, axis=-1) ** (-k), z[..., 1:]


def annulus_bounds(u, prefix, p: BasinParams) -> tuple[float, float]:
    """Bounds on |z^j| given u and z^2..z^{j-1}, j = len(prefix) + 2."""
    au = abs(complex(u))
    if au == 0:
        raise PreconditionError("u must be nonzero")
    j = len(prefix) + 2
    if j > p.d:
        raise PreconditionError("prefix too long")
    pre = float(np.prod(np.abs(np.asarray(prefix, dtype=complex)))) if len(prefix) else 1.0
    lower = au ** (1 - (p.d - j + 1) * p.beta) / pre
    upper = au ** p.beta
    if lower >= upper:
        raise EmptyAnnulus(f"annulus for z^{j} is empty: {lower:.3g} >= {upper:.3g}")
    return lower, upper


def sample_basin(p: BasinParams, n: int, seed=0, depth: float = 5.0, margin: float = 1e-9) -> np.ndarray:
    """Low-discrepancy points of B_h: uniform in arg u, log|u| and the log-annulus coordinates."""
    d, k = p.d, p.k
    sob = qmc.Sobol(2 * d, scramble=True, seed=seed)
    m = int(math.ceil(math.log2(max(n, 2))))
    x = sob.random_base2(m)[:n]
    x = margin + (1 - 2 * margin) * x
    phi = (2 * x[:, 0] - 1) * p.theta
    umax = (np.cos(k * phi) / p.R) ** (1 / k)
    logu = np.log(umax) - depth * x[:, 1]
    u = np.exp(logu + 1j * (phi + p.center))
    z = np.empty((n, d), dtype=complex)
    pre = np.ones(n)
    au = np.abs(u)
    for j in range(2, d + 1):
        lo = np.log(au ** (1 - (d - j + 1) * p.beta) / pre)
        hi = p.beta * np.log(au)
        c = 2 * (j - 1)
        r = np.exp(lo + (hi - lo) * x[:, c])
        zj = r * np.exp(2j * np.pi * x[:, c + 1])
        z[:, j - 1] = zj
        pre = pre * r
    z[:, 0] = u / np.prod(z[:, 1:], axis=1)
    return z


@dataclass
class R0Certificate:
    R0: float
    theta: float
    beta: float
    samples: int
    tried: list = field(default_factory=list)  # (R, passed, min drift margin, failures)

    def to_json_dict(self) -> dict:
        return {"R0": self.R0, "theta": self.theta, "beta": self.beta, "samples": self.samples,
                "tried": [{"R": R, "passed": ok, "drift_margin": mm, "failures": f}
                          for R, ok, mm, f in self.tried]}


def check_l_beta(germ: GermSpec, beta: float):
    """beta (l + d - 1) > 2k + 1, only binding when there is a tail."""
    if germ.tail.coefficients and not beta * (germ.l + germ.d - 1) > 2 * germ.k + 1:
        raise PreconditionError(
            f"beta*(l+d-1) = {beta * (germ.l + germ.d - 1):.4g} must exceed 2k+1 = {2 * germ.k + 1}")


def invariance_margin(germ: GermSpec, p: BasinParams, z: np.ndarray):
    """(F(z) in B_h mask, drift margin 1/2 - |U(Fz) - U(z) - 1|)."""
    fz = evaluate(germ, z)
    inside = basin_codes(fz, p) == 0
    U0 = np.prod(z, axis=-1) ** (-p.k)
    U1 = np.prod(fz, axis=-1) ** (-p.k)
    return inside, 0.5 - np.abs(U1 - U0 - 1)


def find_R0(germ: GermSpec, theta: float, beta: float, samples: int = 10_000, seed=0,
            R_start: float = 1.0, R_max: float = 1e12) -> R0Certificate:
    d, k = germ.d, germ.k
    BasinParams(d, k, 0, 1.0, theta, beta)  # range checks
    check_l_beta(germ, beta)
    cert = R0Certificate(math.nan, theta, beta, samples)
    R = R_start
    while R <= R_max:
        ok, worst, fails = True, math.inf, 0
        for h in range(k):
            p = BasinParams(d, k, h, R, theta, beta)
            z = sample_basin(p, samples, seed=seed + h)
            inside, margin = invariance_margin(germ, p, z)
            bad = ~inside | ~(margin > 0)
            fails += int(bad.sum())
            worst = min(worst, float(margin.min()))
            ok = ok and not bad.any()
        cert.tried.append((R, ok, worst, fails))
        if ok:
            cert.R0 = R
            return cert
        R *= 2
    raise SearchExhausted(f"no R <= {R_max:g} passed the sampled invariance test")


def polar_sample(p: BasinParams, n: int, seed=0, depth: float = 6.0):
    """Figure-style decomposition of B_h into a modulus table and an argument table.

    Returns (moduli, arguments): for d = 2 moduli rows are (r1, r2) with
    r1^((1-beta)/beta) < r2 < r1^(beta/(1-beta)); argument rows are (s, t, h)
    with d_{S^1}(s + t, 2 pi h/k) < theta.  For d > 2 the argument table holds
    (s_1, ..., s_d, h) on the ribbon around s_1 + ... + s_d = 2 pi h/k.
    """
    rng = np.random.default_rng(seed)
    d, b = p.d, p.beta
    if d == 2:
        r1 = np.exp(-depth * rng.random(n))
        lo = (1 - b) / b * np.log(r1)
        hi = b / (1 - b) * np.log(r1)
        r2 = np.exp(lo + (hi - lo) * rng.random(n))
        moduli = np.column_stack([r1, r2])
    else:
        pts = sample_basin(replace(p, R=min(p.R, 0.5)), n, seed=seed, depth=depth)
        moduli = np.abs(pts)
    s = 2 * np.pi * rng.random((n, d - 1))
    last = p.center - s.sum(axis=1) + p.theta * (2 * rng.random(n) - 1) * (1 - 1e-9)
    args = np.column_stack([s, last]) % (2 * np.pi)
    arguments = np.column_stack([args, np.full(n, p.h)])
    return moduli, arguments


def circle_distance(a, b):
    return np.abs((np.asarray(a) - b + np.pi) % (2 * np.pi) - np.pi)
