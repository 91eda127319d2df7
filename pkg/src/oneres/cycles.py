"""p-th roots of the normal form and the basin permutation they induce."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basins import BasinParams, basin_codes
from .errors import NotADivisor, PreconditionError
from .germs import GermSpec, evaluate
from .orbits import classify_batch
from .series import TruncatedSeriesMap, compose, evaluate_series


@dataclass(frozen=True)
class RootGermSpec:
    base: GermSpec
    p: int
    mu_angles: tuple[float, ...]
    a: complex
    b: complex

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def k(self) -> int:
        return self.base.k

    @property
    def mus(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.asarray(self.mu_angles))

    def series(self, D: int | None = None) -> TruncatedSeriesMap:
        """M_p z (1 + a u^k + b u^{2k}) truncated at D (default 3kd - 1)."""
        d, k = self.d, self.k
        D = 3 * k * d - 1 if D is None else D
        mu = self.mus
        terms = []
        for j in range(d):
            e = [0] * d
            e[j] = 1
            for c, q in ((1.0, 0), (self.a, 1), (self.b, 2)):
                alpha = tuple(x + q * k for x in e)
                if sum(alpha) <= D and c != 0:
                    terms.append((alpha, j, mu[j] * c))
        return TruncatedSeriesMap.from_terms(d, D, terms)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        uk = np.prod(z, axis=-1) ** self.k
        return self.mus * z * (1 + self.a * uk + self.b * uk * uk)[..., None]

    def constraint_errors(self) -> tuple[float, float]:
        """(max |mu_j^p / lambda_j - 1|, |prod mu / zeta_p - 1|)"""
        mu, lam = self.mus, self.base.lambdas
        zeta = np.exp(2j * np.pi / self.p)
        return float(np.abs(mu ** self.p / lam - 1).max()), float(abs(np.prod(mu) / zeta - 1))

    def to_json_dict(self) -> dict:
        return {"base": self.base.to_json_dict(), "p": self.p, "mu_angles": list(self.mu_angles),
                "a": [self.a.real, self.a.imag], "b": [self.b.real, self.b.imag]}


def make_root_germ(base: GermSpec, p: int) -> RootGermSpec:
    k, d = base.k, base.d
    if p < 1 or k % p:
        raise NotADivisor(f"p={p} does not divide k={k}")
    if base.tail.coefficients:
        raise PreconditionError("root germs are built from the normal form; pass a tail-free base")
    th = np.asarray(base.multipliers.angles, dtype=float)
    N = int(round(th.sum()))
    m = [0] * d
    m[-1] = (1 - N) % p
    angles = tuple(float(t / p + mj / p) for t, mj in zip(th, m))
    c = -1.0 / (k * d)
    a = c / p
    b = -((p - 1) / 2) * a * a * (k * d + 1)
    return RootGermSpec(base, p, angles, complex(a), complex(b))


def iterate_series(root: RootGermSpec, m: int, D: int | None = None) -> TruncatedSeriesMap:
    D = 3 * root.k * root.d - 1 if D is None else D
    s = root.series(D)
    out = s
    for _ in range(m - 1):
        out = compose(s, out, D)
    return out


def iterate_coefficients(root: RootGermSpec, m: int) -> dict:
    """Measured (a_m, b_m) of the m-th iterate against the closed forms m a and m b + m(m-1)/2 a^2 (kd+1)."""
    d, k = root.d, root.k
    s = iterate_series(root, m, 2 * k * d + 1)
    mu = root.mus
    a_meas, b_meas = [], []
    for j in range(d):
        e1 = tuple((1 if i == j else 0) + k for i in range(d))
        e2 = tuple((1 if i == j else 0) + 2 * k for i in range(d))
        a_meas.append(s.coefficient(e1)[j] / mu[j] ** m)
        b_meas.append(s.coefficient(e2)[j] / mu[j] ** m)
    a_cf = m * root.a
    b_cf = m * root.b + m * (m - 1) / 2 * root.a ** 2 * (k * d + 1)
    return {"m": m, "a_measured": a_meas, "b_measured": b_meas, "a_closed": a_cf, "b_closed": b_cf,
            "a_error": float(max(abs(x - a_cf) for x in a_meas)),
            "b_error": float(max(abs(x - b_cf) for x in b_meas))}


def verify_root(root: RootGermSpec, D: int | None = None) -> dict:
    """Max coefficient deviation of root^p from F_0 over all degrees <= D (default 3kd - 1)."""
    d, k = root.d, root.k
    D = 3 * k * d - 1 if D is None else D
    comp = iterate_series(root, root.p, D)
    target = root.base.normal_form_series(D)
    diff = comp - target
    dev, worst = 0.0, None
    for alpha, j, v in diff.terms():
        if abs(v) > dev:
            dev, worst = abs(v), (alpha, j + 1)
    return {"p": root.p, "degree": D, "max_deviation": dev, "worst": worst,
            "constraint_errors": root.constraint_errors()}


def composition_consistency(root: RootGermSpec, n: int = 100, radius: float = 1e-2, seed=0) -> float:
    """Series of root^p evaluated vs pointwise iteration, on random points with |z| <= radius."""
    rng = np.random.default_rng(seed)
    d = root.d
    z = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    z *= radius * rng.random((n, 1)) ** (1 / (2 * d)) / np.linalg.norm(z, axis=1, keepdims=True)
    s = iterate_series(root, root.p)
    w = z.copy()
    for _ in range(root.p):
        w = root(w)
    return float(np.abs(evaluate_series(s, z) - w).max())


def _cycles(perm: dict) -> list[tuple[int, ...]]:
    seen, out = set(), []
    for h in sorted(perm):
        if h in seen or perm[h] is None:
            continue
        cyc, x = [], h
        while x not in seen and x is not None:
            seen.add(x)
            cyc.append(x)
            x = perm.get(x)
        out.append(tuple(cyc))
    return out


def basin_permutation_check(root: RootGermSpec, params: BasinParams, r: float = 1e-2,
                            samples: int = 1000, seed=0, spread: float = 0.05) -> dict:
    """Sample B_h near z_r = (r, ..., r, zeta_k^h r) and locate the root-germ images."""
    d, k = root.d, root.k
    rng = np.random.default_rng(seed)
    perm, rates, counts = {}, {}, {}
    for h in range(k):
        p = params.with_h(h)
        zr = np.full(d, r, dtype=complex)
        zr[-1] *= np.exp(2j * np.pi * h / k)
        pts = []
        while sum(len(x) for x in pts) < samples:
            noise = spread * (rng.standard_normal((samples, d)) + 1j * rng.standard_normal((samples, d)))
            cand = zr * np.exp(noise)
            pts.append(cand[basin_codes(cand, p) == 0])
        Z = np.vstack(pts)[:samples]
        img = root(Z)
        hits = np.stack([basin_codes(img, params.with_h(g)) == 0 for g in range(k)])
        counts[h] = hits.sum(axis=1).tolist()
        target = int(np.argmax(hits.sum(axis=1)))
        perm[h] = target
        rates[h] = float(hits[target].mean())
    expected = {h: (h + k // root.p) % k for h in range(k)}
    return {"permutation": perm, "expected": expected, "success": rates, "counts": counts,
            "cycles": _cycles(perm), "matches": perm == expected and all(v == 1.0 for v in rates.values())}


@dataclass(frozen=True)
class ProductGerm:
    """(z, w) -> (F(z), w/2)"""
    base: GermSpec
    extra: int

    @property
    def d(self) -> int:
        return self.base.d + self.extra

    def __call__(self, zw):
        zw = np.asarray(zw, dtype=complex)
        d = self.base.d
        return np.concatenate([evaluate(self.base, zw[..., :d]), zw[..., d:] / 2], axis=-1)

    def series(self, D: int) -> TruncatedSeriesMap:
        d = self.base.d
        terms = [(tuple(a) + (0,) * self.extra, j, v) for a, j, v in self.base.series(D).terms()]
        for i in range(self.extra):
            e = [0] * self.d
            e[d + i] = 1
            terms.append((tuple(e), d + i, 0.5))
        return TruncatedSeriesMap.from_terms(self.d, D, terms)


def product_extension(germ: GermSpec, extra: int) -> ProductGerm:
    if extra < 1:
        raise PreconditionError("extra must be >= 1")
    return ProductGerm(germ, int(extra))


def iterate_product(prod: ProductGerm, zw, n: int) -> np.ndarray:
    out = np.asarray(zw, dtype=complex)
    for _ in range(n):
        out = prod(out)
    return out


def classify_product(prod: ProductGerm, ZW, r: float, n_max: int, params: BasinParams):
    """Classification of (z, w) orbits: the w-part contracts exactly, so it is that of z."""
    ZW = np.atleast_2d(np.asarray(ZW, dtype=complex))
    d = prod.base.d
    kind, index, first = classify_batch(prod.base, ZW[:, :d], r, n_max, params)
    w_final = ZW[:, d:] * 2.0 ** (-n_max)
    return kind, index, first, float(np.abs(w_final).max()) if w_final.size else 0.0
