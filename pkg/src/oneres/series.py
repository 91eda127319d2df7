"""Sparse truncated multivariate power series maps.

A :class:`TruncatedSeriesMap` stores the Taylor data of a map C^d -> C^m up to a
total-degree cap as a sparse dictionary ``multi-index -> coefficient vector``.
Products and compositions are carried out on dense ``(D+1,)*d`` grids, which is
cheap for the small caps used here and keeps rounding behaviour predictable.

Multi-indices are plain tuples of non-negative ints; components in the JSON
monomial lists are 1-based, matching the usual ``e_1, ..., e_d`` notation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import mpmath
import numpy as np
from scipy.signal import convolve

from .errors import NonzeroConstant, PreconditionError, SingularLinearPart

MultiIndex = tuple[int, ...]

EXTENDED_DPS = 34


def degree(alpha: Sequence[int]) -> int:
    return int(sum(alpha))


def leq(beta: Sequence[int], alpha: Sequence[int]) -> bool:
    """Componentwise order ``beta <= alpha``."""
    return all(b <= a for b, a in zip(beta, alpha))


def unit(d: int, j: int) -> MultiIndex:
    """The unit multi-index ``e_j`` (0-based ``j``)."""
    return tuple(1 if i == j else 0 for i in range(d))


@lru_cache(maxsize=None)
def indices_of_degree(d: int, n: int) -> tuple[MultiIndex, ...]:
    """All multi-indices in ``d`` variables of total degree ``n``, lexicographically descending."""
    if d == 1:
        return ((n,),)
    out = []
    for first in range(n, -1, -1):
        for rest in indices_of_degree(d - 1, n - first):
            out.append((first,) + rest)
    return tuple(out)


def indices_upto(d: int, D: int, start: int = 0) -> Iterator[MultiIndex]:
    for n in range(start, D + 1):
        yield from indices_of_degree(d, n)


@lru_cache(maxsize=None)
def _degree_grid(d: int, D: int) -> np.ndarray:
    grids = np.indices((D + 1,) * d)
    return grids.sum(axis=0)


@lru_cache(maxsize=None)
def _mask(d: int, D: int) -> np.ndarray:
    return _degree_grid(d, D) <= D


def _zeros(d: int, D: int, m: int | None, extended: bool) -> np.ndarray:
    shape = ((m,) if m is not None else ()) + (D + 1,) * d
    if not extended:
        return np.zeros(shape, dtype=complex)
    arr = np.empty(shape, dtype=object)
    arr.fill(mpmath.mpc(0))
    return arr


def _one(d: int, D: int, extended: bool) -> np.ndarray:
    arr = _zeros(d, D, None, extended)
    arr[(0,) * d] = mpmath.mpc(1) if extended else 1.0
    return arr


def _mul(a: np.ndarray, b: np.ndarray, d: int, D: int) -> np.ndarray:
    """Product of two dense scalar series truncated to total degree ``D``."""
    if a.dtype != object:
        full = convolve(a, b, method="direct")
        out = full[(slice(0, D + 1),) * d].copy()
        out[~_mask(d, D)] = 0.0
        return out
    out = _zeros(d, D, None, True)
    deg = _degree_grid(d, D)
    for idx in zip(*np.nonzero(np.vectorize(lambda x: x != 0, otypes=[bool])(a))):
        n = sum(idx)
        if n > D:
            continue
        coeff = a[idx]
        span = tuple(slice(i, D + 1) for i in idx)
        src = tuple(slice(0, D + 1 - i) for i in idx)
        keep = deg[src] <= D - n
        block = b[src] * coeff
        block = np.where(keep, block, mpmath.mpc(0))
        out[span] = out[span] + block
    return out


@dataclass(frozen=True)
class TruncatedSeriesMap:
    """Polynomial map ``C^d -> C^m`` truncated at total degree ``degree_cap``.

    ``coefficients`` maps multi-indices to length-``m`` complex vectors; zero
    vectors are never stored.
    """

    d: int
    degree_cap: int
    coefficients: Mapping[MultiIndex, np.ndarray]
    m: int | None = None

    def __post_init__(self):
        m = self.d if self.m is None else self.m
        object.__setattr__(self, "m", m)
        clean = {}
        for alpha, vec in dict(self.coefficients).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.d or min(alpha) < 0:
                raise PreconditionError(f"bad multi-index {alpha} for d={self.d}")
            if degree(alpha) > self.degree_cap:
                raise PreconditionError(f"index {alpha} exceeds degree cap {self.degree_cap}")
            vec = np.array(vec, dtype=complex).reshape(m)
            if np.any(vec != 0):
                vec.setflags(write=False)
                clean[alpha] = vec
        object.__setattr__(self, "coefficients", MappingProxyType(clean))

    # construction -----------------------------------------------------------------

    @classmethod
    def zero(cls, d: int, degree_cap: int, m: int | None = None) -> "TruncatedSeriesMap":
        return cls(d, degree_cap, {}, m)

    @classmethod
    def from_terms(cls, d, degree_cap, terms, m=None, truncate=True):
        """Build from ``(exponent, component, value)`` triples (0-based component).

        Repeated entries are summed; with ``truncate`` monomials beyond the cap
        are silently dropped.
        """
        m = d if m is None else m
        acc: dict[MultiIndex, np.ndarray] = {}
        for alpha, j, value in terms:
            alpha = tuple(int(a) for a in alpha)
            if degree(alpha) > degree_cap:
                if truncate:
                    continue
                raise PreconditionError(f"index {alpha} exceeds degree cap {degree_cap}")
            vec = acc.setdefault(alpha, np.zeros(m, dtype=complex))
            vec[j] += value
        return cls(d, degree_cap, acc, m)

    @classmethod
    def identity(cls, d: int, degree_cap: int) -> "TruncatedSeriesMap":
        return cls.linear(np.eye(d), degree_cap)

    @classmethod
    def linear(cls, matrix, degree_cap: int) -> "TruncatedSeriesMap":
        """The linear map ``z -> M z``; a 1-D argument is read as a diagonal."""
        M = np.asarray(matrix, dtype=complex)
        if M.ndim == 1:
            M = np.diag(M)
        m, d = M.shape
        return cls(d, degree_cap, {unit(d, i): M[:, i] for i in range(d)}, m)

    @classmethod
    def from_dense(cls, arr: np.ndarray, degree_cap: int) -> "TruncatedSeriesMap":
        m = arr.shape[0]
        d = arr.ndim - 1
        coeffs = {}
        deg = _degree_grid(d, arr.shape[1] - 1)
        nz = np.zeros(arr.shape[1:], dtype=bool)
        if arr.dtype == object:
            arr = np.vectorize(complex, otypes=[complex])(arr)
        for comp in arr:
            nz |= comp != 0
        nz &= deg <= degree_cap
        for idx in zip(*np.nonzero(nz)):
            coeffs[tuple(int(i) for i in idx)] = arr[(slice(None),) + idx]
        return cls(d, degree_cap, coeffs, m)

    # access ---------------------------------------------------------------------------

    def coefficient(self, alpha: Sequence[int]) -> np.ndarray:
        vec = self.coefficients.get(tuple(alpha))
        if vec is None:
            return np.zeros(self.m, dtype=complex)
        return vec

    def terms(self) -> Iterator[tuple[MultiIndex, int, complex]]:
        for alpha in sorted(self.coefficients, key=lambda a: (degree(a), tuple(-x for x in a))):
            vec = self.coefficients[alpha]
            for j in range(self.m):
                if vec[j] != 0:
                    yield alpha, j, complex(vec[j])

    def linear_part(self) -> np.ndarray:
        M = np.zeros((self.m, self.d), dtype=complex)
        for i in range(self.d):
            M[:, i] = self.coefficient(unit(self.d, i))
        return M

    def truncate(self, D: int) -> "TruncatedSeriesMap":
        D = min(D, self.degree_cap)
        return TruncatedSeriesMap(
            self.d, D, {a: v for a, v in self.coefficients.items() if degree(a) <= D}, self.m)

    def with_cap(self, D: int) -> "TruncatedSeriesMap":
        """Same coefficients (truncated if needed) under a new cap."""
        return TruncatedSeriesMap(
            self.d, D, {a: v for a, v in self.coefficients.items() if degree(a) <= D}, self.m)

    def degree_part(self, n: int) -> "TruncatedSeriesMap":
        return TruncatedSeriesMap(
            self.d, self.degree_cap, {a: v for a, v in self.coefficients.items() if degree(a) == n}, self.m)

    def nonlinear_part(self) -> "TruncatedSeriesMap":
        return TruncatedSeriesMap(
            self.d, self.degree_cap, {a: v for a, v in self.coefficients.items() if degree(a) >= 2}, self.m)

    def max_abs(self) -> float:
        if not self.coefficients:
            return 0.0
        return float(max(np.max(np.abs(v)) for v in self.coefficients.values()))

    def min_degree(self) -> int | None:
        if not self.coefficients:
            return None
        return min(degree(a) for a in self.coefficients)

    def to_dense(self, D: int | None = None, extended: bool = False) -> np.ndarray:
        D = self.degree_cap if D is None else D
        arr = _zeros(self.d, D, self.m, extended)
        for alpha, vec in self.coefficients.items():
            if degree(alpha) <= D:
                if extended:
                    arr[(slice(None),) + alpha] = [mpmath.mpc(complex(x)) for x in vec]
                else:
                    arr[(slice(None),) + alpha] = vec
        return arr

    # arithmetic ---------------------------------------------------------------------------

    def _combine(self, other, sign):
        if (self.d, self.m) != (other.d, other.m):
            raise PreconditionError("shape mismatch")
        cap = min(self.degree_cap, other.degree_cap)
        acc = {a: v.copy() for a, v in self.coefficients.items() if degree(a) <= cap}
        for a, v in other.coefficients.items():
            if degree(a) <= cap:
                acc[a] = acc.get(a, 0) + sign * v
        return TruncatedSeriesMap(self.d, cap, acc, self.m)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c) -> "TruncatedSeriesMap":
        return TruncatedSeriesMap(
            self.d, self.degree_cap, {a: c * v for a, v in self.coefficients.items()}, self.m)

    def __call__(self, z):
        return evaluate_series(self, z)

    # serialization ------------------------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "d": self.d,
            "m": self.m,
            "degree_cap": self.degree_cap,
            "terms": [
                {"exponent": list(a), "component": j + 1, "re": v.real, "im": v.imag}
                for a, j, v in self.terms()
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "TruncatedSeriesMap":
        d = int(doc["d"])
        terms = [
            (t["exponent"], int(t["component"]) - 1, complex(t["re"], t["im"]))
            for t in doc.get("terms", [])
        ]
        cap = doc.get("degree_cap")
        if cap is None:
            cap = max((degree(t[0]) for t in terms), default=1)
        return cls.from_terms(d, int(cap), terms, doc.get("m"), truncate=False)


def multiply(a: TruncatedSeriesMap, b: TruncatedSeriesMap, D: int,
             precision: str = "double") -> TruncatedSeriesMap:
    """Componentwise product truncated to total degree ``D`` (scalar series have ``m == 1``)."""
    if a.d != b.d or a.m != b.m:
        raise PreconditionError("multiply needs series of the same shape")
    extended = precision == "extended"
    with mpmath.workdps(EXTENDED_DPS):
        A = a.to_dense(D, extended)
        B = b.to_dense(D, extended)
        out = _zeros(a.d, D, a.m, extended)
        for i in range(a.m):
            out[i] = _mul(A[i], B[i], a.d, D)
    return TruncatedSeriesMap.from_dense(out, D)


def _compose_dense(outer: TruncatedSeriesMap, inner_dense: Sequence[np.ndarray], d: int, D: int,
                   extended: bool) -> np.ndarray:
    """Dense ``outer(inner)`` where ``inner_dense[i]`` is the i-th inner component."""
    m = outer.m
    n_in = outer.d
    support = [a for a in outer.coefficients if degree(a) <= D]
    if not support:
        return _zeros(d, D, m, extended)

    max_exp = [max((a[i] for a in support), default=0) for i in range(n_in)]
    powers: list[list[np.ndarray]] = []
    for i in range(n_in):
        seq = [_one(d, D, extended)]
        for _ in range(max_exp[i]):
            seq.append(_mul(seq[-1], inner_dense[i], d, D))
        powers.append(seq)

    prefix_cache: dict[MultiIndex, np.ndarray] = {(): _one(d, D, extended)}

    def prefix_product(prefix):
        if prefix not in prefix_cache:
            head = prefix_product(prefix[:-1])
            prefix_cache[prefix] = _mul(head, powers[len(prefix) - 1][prefix[-1]], d, D)
        return prefix_cache[prefix]

    groups: dict[MultiIndex, list[MultiIndex]] = {}
    for a in support:
        groups.setdefault(a[:-1], []).append(a)

    out = _zeros(d, D, m, extended)
    for prefix, members in groups.items():
        combo = _zeros(d, D, m, extended)
        for a in members:
            vec = outer.coefficients[a]
            last = powers[n_in - 1][a[-1]]
            for j in range(m):
                if vec[j] != 0:
                    c = mpmath.mpc(complex(vec[j])) if extended else vec[j]
                    combo[j] = combo[j] + c * last
        pp = prefix_product(prefix)
        is_one = len(prefix) == 0 or all(e == 0 for e in prefix)
        for j in range(m):
            out[j] = out[j] + (combo[j] if is_one else _mul(pp, combo[j], d, D))
    return out


def compose(outer: TruncatedSeriesMap, inner: TruncatedSeriesMap, D: int,
            precision: str = "double") -> TruncatedSeriesMap:
    """Coefficients of ``outer o inner`` through total degree ``D``.

    Exact through ``D`` because ``inner`` has no constant term.
    """
    if inner.m != outer.d:
        raise PreconditionError(f"cannot compose: outer expects {outer.d} inputs, inner gives {inner.m}")
    const = inner.coefficient((0,) * inner.d)
    if np.any(const != 0):
        raise NonzeroConstant("inner series has a nonzero constant term")
    extended = precision == "extended"
    with mpmath.workdps(EXTENDED_DPS):
        dense_inner = inner.to_dense(D, extended)
        out = _compose_dense(outer, list(dense_inner), inner.d, D, extended)
    return TruncatedSeriesMap.from_dense(out, D)


def invert(h: TruncatedSeriesMap, D: int, precision: str = "double") -> TruncatedSeriesMap:
    """Compositional inverse of ``h`` through degree ``D`` by fixed-point iteration.

    Each sweep ``g <- L^{-1}(z - N(g))`` fixes one further degree, so ``D - 1``
    sweeps suffice.
    """
    if h.m != h.d:
        raise PreconditionError("invert needs a square map")
    if np.any(h.coefficient((0,) * h.d) != 0):
        raise NonzeroConstant("series to invert has a nonzero constant term")
    L = h.linear_part()
    if np.linalg.matrix_rank(L, tol=1e-12 * max(1.0, np.abs(L).max())) < h.d:
        raise SingularLinearPart("linear part is not invertible")
    Linv = np.linalg.inv(L)
    nonlinear = h.nonlinear_part().with_cap(D)
    ident = TruncatedSeriesMap.identity(h.d, D)
    g = TruncatedSeriesMap.linear(Linv, D)
    for _ in range(max(D - 1, 0)):
        g = linear_then(Linv, ident - compose(nonlinear, g, D, precision))
    return g


def linear_then(M, s: TruncatedSeriesMap) -> TruncatedSeriesMap:
    """The series ``z -> M s(z)``."""
    M = np.asarray(M, dtype=complex)
    return TruncatedSeriesMap(
        s.d, s.degree_cap, {a: M @ v for a, v in s.coefficients.items()}, M.shape[0])


def evaluate_series(s: TruncatedSeriesMap, z) -> np.ndarray:
    """Evaluate the stored polynomial at a point or a batch of points (last axis = variables)."""
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != s.d:
        raise PreconditionError(f"point has {z.shape[-1]} coordinates, series expects {s.d}")
    out = np.zeros(z.shape[:-1] + (s.m,), dtype=complex)
    if not s.coefficients:
        return out
    max_exp = [max(a[i] for a in s.coefficients) for i in range(s.d)]
    pw = []
    for i in range(s.d):
        seq = [np.ones(z.shape[:-1], dtype=complex)]
        for _ in range(max_exp[i]):
            seq.append(seq[-1] * z[..., i])
        pw.append(seq)
    # highest degree first, so small terms are added last
    for alpha in sorted(s.coefficients, key=degree, reverse=True):
        mono = pw[0][alpha[0]]
        for i in range(1, s.d):
            if alpha[i]:
                mono = mono * pw[i][alpha[i]]
        out += mono[..., None] * s.coefficients[alpha]
    return out


def monomials_of(terms: Iterable[tuple[Sequence[int], int, complex]], d: int, cap: int) -> TruncatedSeriesMap:
    return TruncatedSeriesMap.from_terms(d, cap, terms)


def random_series(rng: np.random.Generator, d: int, cap: int, min_degree: int = 2,
                  density: float = 1.0, scale: float = 1.0, linear=None) -> TruncatedSeriesMap:
    """Random map used by tests: optional linear part plus random terms in ``[min_degree, cap]``."""
    terms = []
    if linear is not None:
        M = np.asarray(linear, dtype=complex)
        if M.ndim == 1:
            M = np.diag(M)
        for i, j in itertools.product(range(d), range(d)):
            terms.append((unit(d, j), i, M[i, j]))
    for alpha in indices_upto(d, cap, min_degree):
        for j in range(d):
            if rng.random() < density:
                terms.append((alpha, j, scale * complex(rng.normal(), rng.normal())))
    return TruncatedSeriesMap.from_terms(d, cap, terms)
