"""One-resonant germs F(z) = Λz(1 - u^k/(kd)) + tail, with u = z^1 ... z^d."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sympy import prime

from .errors import ExtraResonance, PreconditionError, RootOfUnity, TailTooLow
from .series import TruncatedSeriesMap, degree, indices_upto, unit

RESONANCE_TOL = 1e-9


def _dist_to_int(x):
    return np.abs(x - np.round(x))


@dataclass(frozen=True)
class Multipliers:
    """Unit-modulus multipliers stored by their angles, lambda_j = exp(2 pi i theta_j)."""

    d: int
    angles: tuple[float, ...]
    resonance_scan_degree: int = 50
    k: int = 1
    test_mode: bool = False

    @property
    def lambdas(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.asarray(self.angles))

    @property
    def log_lambdas(self) -> np.ndarray:
        """Principal logarithms, imaginary part in (-pi, pi]."""
        th = np.asarray(self.angles, dtype=float)
        frac = th - np.round(th)
        frac = np.where(frac <= -0.5, frac + 1.0, frac)
        return 2j * np.pi * frac

    def power(self, alpha: Sequence[int]) -> complex:
        """lambda^alpha, computed through the angle so that |.| = 1 exactly."""
        return complex(np.exp(2j * np.pi * float(np.dot(alpha, self.angles) % 1.0)))

    def divisor(self, alpha: Sequence[int], i: int) -> complex:
        return self.power(alpha) - self.lambdas[i]

    def to_dict(self) -> dict:
        return {"d": self.d, "k": self.k, "angles": list(self.angles),
                "resonance_scan_degree": self.resonance_scan_degree}


def default_angles(d: int) -> list[float]:
    if d == 2:
        return [math.sqrt(2), -math.sqrt(2)]
    head = [math.sqrt(prime(j + 1)) % 1.0 for j in range(d - 1)]
    return head + [-sum(head)]


def resonance_scan(angles: Sequence[float], N: int, tol: float = RESONANCE_TOL):
    """Return the first (m, j) with |m| <= N, lambda^m = lambda_j and m not of the form q*alpha + e_j."""
    th = np.asarray(angles, dtype=float)
    d = len(th)
    idx = np.array(list(indices_upto(d, N)), dtype=np.int64)
    phase = idx @ th
    for j in range(d):
        hits = np.nonzero(_dist_to_int(phase - th[j]) < tol)[0]
        for h in hits:
            m = idx[h].copy()
            m[j] -= 1
            if m.min() < 0 or np.any(m != m[0]):
                return tuple(int(x) for x in idx[h]), j
    return None


def make_multipliers(d: int, scheme="default", scan_degree: int = 50, k: int = 1,
                     test_mode: bool = False) -> Multipliers:
    """Build multipliers from a named scheme ("default", "sqrt2", "primes") or explicit angles."""
    if d < 2:
        raise PreconditionError("d must be at least 2")
    if isinstance(scheme, str):
        if scheme == "sqrt2" and d != 2:
            raise PreconditionError("sqrt2 scheme is for d = 2")
        if scheme == "primes" and d == 2:
            angles = [math.sqrt(2) % 1.0, -(math.sqrt(2) % 1.0)]
        elif scheme in ("default", "sqrt2", "primes"):
            angles = default_angles(d)
        else:
            raise PreconditionError(f"unknown angle scheme {scheme!r}")
    else:
        angles = [float(t) for t in scheme]
    if len(angles) != d:
        raise PreconditionError(f"expected {d} angles, got {len(angles)}")
    if _dist_to_int(sum(angles)) > 1e-12:
        raise PreconditionError("angles must sum to an integer (product of multipliers = 1)")
    if not test_mode:
        for j, t in enumerate(angles):
            for q in range(1, scan_degree + 1):
                if _dist_to_int(q * t) < RESONANCE_TOL:
                    raise RootOfUnity(f"lambda_{j + 1} is a root of unity of order {q}")
        hit = resonance_scan(angles, scan_degree)
        if hit is not None:
            m, j = hit
            raise ExtraResonance(f"lambda^{m} = lambda_{j + 1} is an extra resonance")
    return Multipliers(d, tuple(angles), scan_degree, k, test_mode)


@dataclass(frozen=True)
class GermSpec:
    multipliers: Multipliers
    k: int
    tail: TruncatedSeriesMap
    l: int

    @property
    def d(self) -> int:
        return self.multipliers.d

    @property
    def lambdas(self) -> np.ndarray:
        return self.multipliers.lambdas

    @property
    def K(self) -> int:
        return self.k * self.d

    def normal_form_series(self, D: int) -> TruncatedSeriesMap:
        d, k = self.d, self.k
        lam = self.lambdas
        terms = [(unit(d, j), j, lam[j]) for j in range(d)]
        if k * d + 1 <= D:
            for j in range(d):
                alpha = tuple(k + (1 if i == j else 0) for i in range(d))
                terms.append((alpha, j, -lam[j] / (k * d)))
        return TruncatedSeriesMap.from_terms(d, D, terms)

    def series(self, D: int) -> TruncatedSeriesMap:
        """Taylor data of F through total degree D."""
        return self.normal_form_series(D) + self.tail.with_cap(D)

    @property
    def degree(self) -> int:
        return max(self.k * self.d + 1, self.tail.degree_cap if self.tail.coefficients else 0)

    def __call__(self, z):
        return evaluate(self, z)

    def to_json_dict(self) -> dict:
        return {
            "d": self.d, "k": self.k, "l": self.l,
            "angles": list(self.multipliers.angles),
            "tail": self.tail.to_json_dict()["terms"],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def make_normal_form(mult: Multipliers, k: int | None = None) -> GermSpec:
    k = mult.k if k is None else k
    if k < 1:
        raise PreconditionError("k must be >= 1")
    l = 2 * k * mult.d + 2
    return GermSpec(mult, k, TruncatedSeriesMap.zero(mult.d, l), l)


def make_perturbed(base: GermSpec, tail: TruncatedSeriesMap, l: int) -> GermSpec:
    if l <= 2 * base.k * base.d + 1:
        raise PreconditionError(f"tail order l={l} must exceed 2kd+1={2 * base.k * base.d + 1}")
    if tail.d != base.d or tail.m != base.d:
        raise PreconditionError("tail has the wrong dimension")
    low = [a for a in tail.coefficients if degree(a) < l]
    if low:
        raise TailTooLow(f"tail monomial {low[0]} has degree {degree(low[0])} < l={l}")
    return GermSpec(base.multipliers, base.k, tail, l)


def evaluate(germ: GermSpec, z) -> np.ndarray:
    """F(z) for a point or a batch of points along the last axis."""
    z = np.asarray(z, dtype=complex)
    u = np.prod(z, axis=-1)
    out = germ.lambdas * z * (1 - u ** germ.k / germ.K)[..., None]
    if germ.tail.coefficients:
        out = out + germ.tail(z)
    return out


def germ_from_json(doc) -> GermSpec:
    """Inverse of GermSpec.to_json_dict; accepts a dict or a JSON string."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    d, k = int(doc["d"]), int(doc.get("k", 1))
    angles = doc.get("angles")
    test_mode = bool(doc.get("test_mode", False))
    scan = int(doc.get("resonance_scan_degree", 50))
    mult = make_multipliers(d, angles if angles is not None else "default", scan, k, test_mode)
    base = make_normal_form(mult, k)
    terms = [(t["exponent"], int(t["component"]) - 1, complex(t["re"], t["im"]))
             for t in doc.get("tail", [])]
    if not terms:
        if "l" in doc:
            return GermSpec(mult, k, base.tail, int(doc["l"]))
        return base
    cap = max(degree(t[0]) for t in terms)
    tail = TruncatedSeriesMap.from_terms(d, cap, terms, truncate=False)
    return make_perturbed(base, tail, int(doc.get("l", 2 * k * d + 2)))


def u_of(z) -> np.ndarray:
    return np.prod(np.asarray(z, dtype=complex), axis=-1)
