"""Elimination of monomial families by formal conjugation.

Solves F o H = H o G degree by degree: for each multi-index alpha the
homological equation reads (lambda^alpha - Lambda) h_alpha = R_alpha - g_alpha,
where R_alpha is the degree-|alpha| part of F o H - H o G computed with the
unknown degree-|alpha| terms set to zero.  Indices in A get g_alpha = 0, indices
in A0 keep g_alpha = f_alpha, anything else keeps g_alpha = R_alpha.

Also here: Brjuno functions omega_A, the sigma_r / delta_alpha majorants and the
counting bound on small divisors along the maximising delta decomposition.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConditionViolated, PreconditionError, ZeroDivisor
from .germs import GermSpec, Multipliers
from .series import (TruncatedSeriesMap, compose, degree, evaluate_series, indices_upto,
                     invert, leq, unit)

ZERO_DIVISOR_TOL = 1e-14
THETA = 1.0 / 3.0  # theta = 1/n with n = 3 for unit-modulus multipliers


# exponent sets ---------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentSet:
    predicate: Callable[[tuple], bool]
    tag: str = "custom"

    def __contains__(self, alpha) -> bool:
        return bool(self.predicate(tuple(alpha)))

    def members(self, d: int, D: int, start: int = 0) -> list[tuple]:
        return [a for a in indices_upto(d, D, start) if a in self]

    def __or__(self, other: "ExponentSet") -> "ExponentSet":
        return ExponentSet(lambda a: a in self or a in other, f"({self.tag})|({other.tag})")

    def __and__(self, other: "ExponentSet") -> "ExponentSet":
        return ExponentSet(lambda a: a in self and a in other, f"({self.tag})&({other.tag})")

    def __sub__(self, other: "ExponentSet") -> "ExponentSet":
        return ExponentSet(lambda a: a in self and a not in other, f"({self.tag})-({other.tag})")

    @classmethod
    def explicit(cls, indices: Iterable[Sequence[int]], tag="explicit") -> "ExponentSet":
        s = frozenset(tuple(int(x) for x in a) for a in indices)
        return cls(s.__contains__, tag)

    @classmethod
    def low_order(cls, n: int) -> "ExponentSet":
        """{|beta| <= n}"""
        return cls(lambda a: sum(a) <= n, f"|b|<={n}")

    @classmethod
    def empty(cls) -> "ExponentSet":
        return cls(lambda a: False, "empty")

    @classmethod
    def nonlinear(cls) -> "ExponentSet":
        return cls(lambda a: sum(a) >= 2, "|b|>=2")

    @classmethod
    def level_set(cls, k: int, d: int) -> "ExponentSet":
        """{|beta| > kd+1, min beta = k}"""
        return cls(lambda a: sum(a) > k * d + 1 and min(a) == k, f"A_{k}")

    @classmethod
    def min_level(cls, m: int, low: int) -> "ExponentSet":
        """{|beta| > low, min beta = m}"""
        return cls(lambda a: sum(a) > low and min(a) == m, f"min={m},|b|>{low}")


def is_resonant(alpha: Sequence[int], i: int, k: int = 1) -> bool:
    """Whether alpha = q*k*(1,...,1) + e_i (q >= 0), the one-resonant pattern."""
    m = list(alpha)
    m[i] -= 1
    return min(m) >= 0 and len(set(m)) == 1 and m[0] % k == 0


# Brjuno functions --------------------------------------------------------------------

def _angles_of(mult) -> np.ndarray:
    if isinstance(mult, Multipliers):
        return np.asarray(mult.angles, dtype=float)
    return np.asarray(mult, dtype=float).reshape(-1)


def divisor_table(mult, indices: Sequence[Sequence[int]]) -> np.ndarray:
    """|lambda^alpha - lambda_i| for each listed alpha (rows) and i (columns).

    Computed as 2|sin(pi x)| with x = alpha.theta - theta_i, which keeps tiny
    divisors accurate.
    """
    th = _angles_of(mult)
    idx = np.asarray(indices, dtype=float).reshape(len(indices), len(th))
    x = idx @ th
    x = x[:, None] - th[None, :]
    x = x - np.round(x)
    return 2.0 * np.abs(np.sin(np.pi * x))


@dataclass
class BrjunoReport:
    levels: list[int]
    omega_values: np.ndarray
    witnesses: list[tuple | None]
    partial_sums: np.ndarray


def brjuno_omega(mult, A: ExponentSet, cap: int) -> BrjunoReport:
    """omega_A(2^m) for m = 1..floor(log2 cap) by exhaustive minimisation."""
    if cap < 2:
        raise PreconditionError("cap must be >= 2")
    th = _angles_of(mult)
    d = len(th)
    M = int(math.floor(math.log2(cap)))
    best = 1.0
    witness = None
    omegas, wits = [], []
    prev = 1
    for m in range(1, M + 1):
        top = 2 ** m
        for n in range(max(2, prev + 1), top + 1):
            cand = [a for a in indices_upto(d, n, n) if a in A]
            if not cand:
                continue
            tab = divisor_table(th, cand)
            r, i = np.unravel_index(int(np.argmin(tab)), tab.shape)
            v = float(tab[r, i])
            if v < ZERO_DIVISOR_TOL:
                raise ZeroDivisor(f"lambda^{cand[r]} = lambda_{i + 1} inside A", cand[r], int(i))
            if v < best:
                best, witness = v, (cand[r], int(i))
        prev = top
        omegas.append(best)
        wits.append(witness)
    om = np.array(omegas)
    levels = list(range(1, M + 1))
    sums = np.cumsum(2.0 ** -np.array(levels) * np.log(1.0 / om))
    return BrjunoReport(levels, om, wits, sums)


def brjuno_partial_sums(report: BrjunoReport):
    """(S_1..S_M, increments, decaying) where decaying means increments strictly decrease from m = 3 on."""
    if len(report.levels) < 2:
        raise PreconditionError("need at least two levels")
    S = np.asarray(report.partial_sums)
    inc = np.diff(np.concatenate([[0.0], S]))
    tail = inc[2:]
    decaying = bool(np.all(np.diff(tail) < 0)) if len(tail) > 1 else True
    return S, inc, decaying


# the homological solver ----------------------------------------------------------------

@dataclass
class ConjugationResult:
    H: TruncatedSeriesMap
    G: TruncatedSeriesMap
    residual: float
    divisor_floor: float
    F: TruncatedSeriesMap | None = None
    A0: ExponentSet | None = None
    A: ExponentSet | None = None
    epsilons: dict = field(default_factory=dict)  # alpha -> (eps_alpha, i_alpha), 0-based i
    stages: list = field(default_factory=list)
    survivors: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def max_eliminated(self) -> float:
        """max |g_alpha| over alpha in A through the cap."""
        if self.A is None:
            return 0.0
        vals = [np.abs(v).max() for a, v in self.G.coefficients.items() if a in self.A]
        return float(max(vals, default=0.0))

    def pointwise_residual(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.linalg.norm(self.H(self.G(z)) - self.F(self.H(z)), axis=-1)

    def to_json_dict(self) -> dict:
        return {"H": self.H.to_json_dict(), "G": self.G.to_json_dict(),
                "residual": self.residual, "divisor_floor": self.divisor_floor}


def _as_series(F, D: int) -> TruncatedSeriesMap:
    if isinstance(F, GermSpec):
        return F.series(D)
    return F.with_cap(D)


def _diagonal(F: TruncatedSeriesMap) -> np.ndarray:
    L = F.linear_part()
    off = L - np.diag(np.diag(L))
    if np.abs(off).max(initial=0.0) > 0:
        raise PreconditionError("linear part must be diagonal")
    if np.any(F.coefficient((0,) * F.d) != 0):
        raise PreconditionError("germ must fix the origin")
    return np.diag(L).copy()


def check_condition1(A0: ExponentSet, A: ExponentSet, d: int, D: int, stage=None):
    """Downward closure: A0 closed under <=, and A closed into A0 | A (index 0 counts as A0)."""
    for a in indices_upto(d, D, 1):
        in0, inA = a in A0, a in A
        if not (in0 or inA):
            continue
        for i in range(d):
            if a[i] == 0:
                continue
            b = tuple(x - (1 if j == i else 0) for j, x in enumerate(a))
            if sum(b) == 0:
                continue
            ok = b in A0 if in0 else (b in A0 or b in A)
            if not ok:
                raise ConditionViolated(
                    f"condition (1): {b} <= {a} but {b} is outside the allowed set",
                    1, witness=(a, b), stage=stage)


def check_condition2(F: TruncatedSeriesMap, A0: ExponentSet, A: ExponentSet, D: int, stage=None):
    """Search all sums of stored nonzero f-terms with indices in A0 (at least one nonlinear)."""
    d = F.d
    terms = []
    for beta, j, _ in F.terms():
        if degree(beta) >= 1 and beta in A0:
            terms.append((beta, unit(d, j), degree(beta) >= 2))
    if not any(t[2] for t in terms):
        return
    seen = set()
    queue = deque()
    for beta, e, nl in terms:
        st = (beta, e, nl)
        if st not in seen:
            seen.add(st)
            queue.append(st)
    while queue:
        S, E, nl = queue.popleft()
        if nl and (S in A0 or S in A) and E in A:
            raise ConditionViolated(
                f"condition (2): terms summing to {S} give e_J = {E} in A",
                2, witness=(S, E), stage=stage)
        for beta, e, bnl in terms:
            S2 = tuple(x + y for x, y in zip(S, beta))
            if sum(S2) > D:
                continue
            st = (S2, tuple(x + y for x, y in zip(E, e)), nl or bnl)
            if st not in seen:
                seen.add(st)
                queue.append(st)


def _lambda_power(lam: np.ndarray, alpha) -> complex:
    out = 1.0 + 0j
    for l, a in zip(lam, alpha):
        out *= l ** a
    return out


def solve_homological(F, A0: ExponentSet, A: ExponentSet, D: int, precision: str = "double",
                      check_conditions: bool = True, component_filter=None,
                      stage=None) -> ConjugationResult:
    """Conjugate F to G with g = f on A0 and g = 0 on A, through degree D.

    ``component_filter(alpha, i)`` restricts elimination inside A to selected
    components; components it rejects are treated like indices outside A0 | A.
    """
    F = _as_series(F, D)
    d = F.d
    lam = _diagonal(F)
    if check_conditions:
        check_condition1(A0, A, d, D, stage)
        check_condition2(F, A0, A, D, stage)

    H = TruncatedSeriesMap.identity(d, D)
    G = TruncatedSeriesMap.linear(lam, D)
    epsilons = {}
    floor = math.inf
    for n in range(2, D + 1):
        R = (compose(F, H, n, precision) - compose(H, G, n, precision)).degree_part(n)
        h_terms, g_terms = {}, {}
        for alpha in indices_upto(d, n, n):
            r = R.coefficient(alpha)
            f = F.coefficient(alpha)
            if alpha in A:
                div = _lambda_power(lam, alpha) - lam
                absdiv = np.abs(div)
                i_min = int(np.argmin(absdiv))
                epsilons[alpha] = (float(absdiv[i_min]), i_min)
                h = np.zeros(d, dtype=complex)
                g = np.zeros(d, dtype=complex)
                for i in range(d):
                    if component_filter is not None and not component_filter(alpha, i):
                        g[i] = r[i]
                        continue
                    if absdiv[i] < ZERO_DIVISOR_TOL:
                        raise ZeroDivisor(f"|lambda^{alpha} - lambda_{i + 1}| below threshold",
                                          alpha, i)
                    floor = min(floor, float(absdiv[i]))
                    h[i] = r[i] / div[i]
                h_terms[alpha] = h
                g_terms[alpha] = g
            elif alpha in A0:
                g_terms[alpha] = f
            else:
                g_terms[alpha] = r
        H = H + TruncatedSeriesMap(d, D, h_terms)
        G = G + TruncatedSeriesMap(d, D, g_terms)

    resid = (compose(F, H, D, precision) - compose(H, G, D, precision)).max_abs()
    res = ConjugationResult(H, G, resid, floor, F, A0, A, epsilons)
    res.stages = [res]
    return res


def iterated_elimination(F, partition: Sequence[ExponentSet], D: int, A0: ExponentSet | None = None,
                         precision: str = "double", check_conditions: bool = True) -> ConjugationResult:
    """Eliminate partition[0], then partition[1], ... each stage keeping everything eliminated so far.

    ``A0`` defaults to the indices of degree <= 1 plus everything outside the
    partition through degree D is left as produced.
    """
    F = _as_series(F, D)
    if A0 is None:
        A0 = ExponentSet.low_order(1)
    current = F
    H_total = TruncatedSeriesMap.identity(F.d, D)
    stages = []
    low = A0
    floor = math.inf
    epsilons = {}
    for s, level in enumerate(partition, start=1):
        res = solve_homological(current, low, level, D, precision, check_conditions, stage=s)
        stages.append(res)
        H_total = compose(H_total, res.H, D, precision)
        current = res.G
        floor = min(floor, res.divisor_floor)
        epsilons.update(res.epsilons)
        low = low | level
    union = ExponentSet.empty()
    for level in partition:
        union = union | level
    resid = (compose(F, H_total, D, precision) - compose(H_total, current, D, precision)).max_abs()
    out = ConjugationResult(H_total, current, resid, floor, F, A0, union, epsilons)
    out.stages = stages
    return out


def resonant_correction(G: TruncatedSeriesMap, lambdas, k: int, q: int, D: int):
    """Conjugacy z_j -> z_j (1 + p_j u^(q-k)) cancelling the z_j u^q e_j terms of G.

    Against the u^k part of the normal form, this h changes the z_j u^q
    coefficient by lambda_j (c_j k sum(p) - (q - k) C p_j), C = sum c_j.
    Solvable when q != 2k.
    """
    d = G.d
    lam = np.asarray(lambdas, dtype=complex)
    one = np.eye(d, dtype=int)
    c = np.array([G.coefficient(tuple(one[j] + k))[j] for j in range(d)]) / lam
    r = np.array([G.coefficient(tuple(one[j] + q))[j] for j in range(d)])
    m = q - k
    M = lam[:, None] * (k * c[:, None] * np.ones((d, d)) - m * c.sum() * np.eye(d))
    p = np.linalg.solve(M, -r)
    terms = [(tuple(one[j]), j, 1.0) for j in range(d)]
    terms += [(tuple(one[j] + m), j, p[j]) for j in range(d) if p[j] != 0]
    return TruncatedSeriesMap.from_terms(d, D, terms)


def nicer_tail_preset(germ: GermSpec, D: int, precision: str = "double",
                      survivor_tol: float = 1e-10) -> ConjugationResult:
    """Push the tail of a germ to monomials z^beta e_j with beta >= l*alpha, through degree D.

    Phase 0 brings F to F_N + O(|z|^(ld+2)): non-resonant monomials with
    l <= |beta| <= ld+1 go by the homological solve, resonant ones z_j u^q
    (q > 2k, not already >= l*alpha) by resonant_correction, alternating until
    none is left. Then the iterated elimination with A0 = {|beta| <= ld+1}
    and A_m = {|beta| > ld+1, min beta = m-1}, m = 1..l+1.
    """
    d, k, l = germ.d, germ.k, germ.l
    if l <= 2 * k * d + 1:
        raise PreconditionError("tail order must exceed 2kd+1")
    F = germ.series(D)
    top = l * d + 1
    big = tuple([l] * d)
    lam = germ.lambdas
    qs = [q for q in range(k, l) if q % k == 0 and l <= 1 + q * d <= min(top, D)]

    pre_set = ExponentSet(lambda a: l <= sum(a) <= top and not leq(big, a), "pre")
    H = TruncatedSeriesMap.identity(d, D)
    G = F
    stages, floor, eps = [], math.inf, {}
    # a correction at q only feeds degrees above 1 + qd, so one pass in q order suffices
    for q in qs + [None]:
        pre = solve_homological(G, ExponentSet.low_order(l - 1), pre_set, D, precision,
                                check_conditions=False,
                                component_filter=lambda a, i: not is_resonant(a, i, k))
        stages.append(pre)
        floor = min(floor, pre.divisor_floor)
        eps.update(pre.epsilons)
        H, G = compose(H, pre.H, D, precision), pre.G
        if q is None:
            break
        h = resonant_correction(G, lam, k, q, D)
        if h.nonlinear_part().max_abs() == 0:
            continue
        G = compose(invert(h, D, precision), compose(G, h, D, precision), D, precision)
        H = compose(H, h, D, precision)

    A0 = ExponentSet.low_order(top)
    levels = [ExponentSet.min_level(m - 1, top) for m in range(1, l + 2)]
    main = iterated_elimination(G, levels, D, A0=A0, precision=precision)

    H = compose(H, main.H, D, precision)
    G = main.G
    resid = (compose(F, H, D, precision) - compose(H, G, D, precision)).max_abs()
    union = pre_set
    for lev in levels:
        union = union | lev
    out = ConjugationResult(H, G, resid, min(floor, main.divisor_floor), F,
                            ExponentSet.low_order(1), union, {**eps, **main.epsilons})
    out.stages = stages + main.stages
    nf = germ.normal_form_series(D)
    out.survivors = [(a, j, v) for a, j, v in (G - nf).terms()
                     if abs(v) > survivor_tol and not leq(big, a)]
    if out.survivors:
        out.notes.append("tail terms below l*alpha survived the preset")
    return out


# majorants ---------------------------------------------------------------------------

def sigma_sequence(d: int, r_max: int) -> list[int]:
    """sigma_1 = 1, sigma_r = d * sum_{k>=2} sum_{r_1+..+r_k = r} prod sigma_{r_i} (exact integers)."""
    sig = [0, 1]
    for r in range(2, r_max + 1):
        # power[k][s] = coefficient of t^s in sigma(t)^k restricted to known terms
        total = 0
        prev = sig + [0] * (r + 1 - len(sig))
        pw = prev[:r + 1]
        for _ in range(2, r + 1):
            nxt = [0] * (r + 1)
            for a in range(1, r + 1):
                if pw[a] == 0:
                    continue
                for b in range(1, r + 1 - a):
                    nxt[a + b] += pw[a] * prev[b]
            pw = nxt
            total += pw[r]
        sig.append(d * total)
    return sig[1:]


def sigma_closed_form_coeffs(d: int, r_max: int) -> np.ndarray:
    """Taylor coefficients of (1 + t - sqrt(1 - (4d+2)t + t^2)) / (2(d+1)) via the square-root recurrence."""
    p = np.zeros(r_max + 1)
    p[0], p[1] = 1.0, -(4 * d + 2)
    if r_max >= 2:
        p[2] = 1.0
    s = np.zeros(r_max + 1)
    s[0] = 1.0
    for n in range(1, r_max + 1):
        acc = p[n] - sum(s[i] * s[n - i] for i in range(1, n))
        s[n] = acc / 2.0
    num = -s
    num[0] += 1.0
    num[1] += 1.0
    return (num / (2 * (d + 1)))[1:]


@dataclass
class DeltaTree:
    delta: dict  # alpha -> delta_alpha
    parts: dict  # alpha -> list of parts in the maximising decomposition


def delta_majorants(epsilons: dict, d: int, D: int) -> DeltaTree:
    """delta_alpha with the maximising decomposition; eps entries outside A are treated as delta = 0."""
    delta = {unit(d, j): 1.0 for j in range(d)}
    parts = {}
    best_multi = {u: (1.0, [u]) for u in delta}  # best product over >= 1 parts

    def get_multi(a):
        return best_multi.get(a, (0.0, None))

    for n in range(2, D + 1):
        for a in indices_upto(d, n, n):
            best, split = 0.0, None
            if a in epsilons:
                for b in indices_upto(d, n - 1, 1):
                    if not leq(b, a):
                        continue
                    db = delta.get(b, 0.0)
                    if db == 0.0:
                        continue
                    rest = tuple(x - y for x, y in zip(a, b))
                    pr, rparts = get_multi(rest)
                    if pr * db > best:
                        best, split = pr * db, [b] + rparts
                if split is not None:
                    delta[a] = best / epsilons[a][0]
                    parts[a] = sorted(split, key=lambda t: -sum(t))
            # best product over >= 1 parts (single part = delta itself)
            mb, mparts = delta.get(a, 0.0), [a] if a in delta else None
            for b in indices_upto(d, n - 1, 1):
                if not leq(b, a):
                    continue
                db = delta.get(b, 0.0)
                if db == 0.0:
                    continue
                rest = tuple(x - y for x, y in zip(a, b))
                pr, rparts = get_multi(rest)
                if pr * db > mb:
                    mb, mparts = pr * db, [b] + rparts
            if mparts is not None and mb > 0:
                best_multi[a] = (mb, mparts)
    return DeltaTree(delta, parts)


def tree_nodes(tree: DeltaTree, alpha) -> list:
    """All indices |.| >= 2 appearing in the full decomposition of delta_alpha (root included)."""
    out, stack = [], [tuple(alpha)]
    while stack:
        a = stack.pop()
        if sum(a) < 2:
            continue
        out.append(a)
        stack.extend(tree.parts.get(a, []))
    return out


def omega_from_epsilons(epsilons: dict, m: int) -> float:
    """omega_A(m) restricted to the recorded indices; omega(1) = +inf."""
    if m <= 1:
        return math.inf
    vals = [e for a, (e, _) in epsilons.items() if 2 <= sum(a) <= m]
    return min(vals + [1.0])


def counting_check(tree: DeltaTree, epsilons: dict, D: int, theta: float = THETA):
    """Max over alpha, m, j of N_m^j(alpha) - bound (<= 0 means Lemma-style bound holds), with witness."""
    worst, witness = -math.inf, None
    omegas = {m: omega_from_epsilons(epsilons, m) for m in range(1, D + 2)}
    for a in tree.delta:
        if sum(a) < 2:
            continue
        nodes = tree_nodes(tree, a)
        n = sum(a)
        for m in range(1, D + 2):
            thr = theta * omegas[m]
            for j in range(len(a)):
                N = sum(1 for b in nodes if epsilons[b][1] == j and epsilons[b][0] < thr)
                bound = 0 if n <= m else 2 * n / m - 1
                if N - bound > worst:
                    worst, witness = N - bound, (a, m, j, N, bound)
    return worst, witness


def majorant_diagnostics(d: int, r_max: int, conj: ConjugationResult | None = None,
                         theta: float = THETA) -> dict:
    sig = sigma_sequence(d, r_max)
    closed = sigma_closed_form_coeffs(d, r_max)
    rel = np.abs(np.array(sig, dtype=float) - closed) / np.array(sig, dtype=float)
    report = {"sigma": sig, "closed_form": closed.tolist(), "sigma_rel_error": float(rel.max())}
    if conj is None:
        return report

    stage_reports = []
    for st in conj.stages:
        D = st.H.degree_cap
        eps = st.epsilons
        tree = delta_majorants(eps, d, D)
        worst, wit = counting_check(tree, eps, D, theta)
        sig_D = sigma_sequence(d, D)
        # scale so that ||f_alpha||_1 <= 1 for |alpha| >= 2
        s = 1.0
        for a, v in st.F.coefficients.items():
            n = sum(a)
            if n >= 2:
                s = min(s, (1.0 / np.abs(v).sum()) ** (1.0 / (n - 1)))
        h_ratio = 0.0
        for a, v in st.H.coefficients.items():
            n = sum(a)
            if n < 2 or a not in eps:
                continue
            lhs = np.abs(v).sum() * s ** (n - 1)
            rhs = sig_D[n - 1] * tree.delta.get(a, 0.0)
            if lhs > 0:
                h_ratio = max(h_ratio, lhs / rhs if rhs > 0 else math.inf)
        L = max(1, int(math.ceil(math.log2(max(D, 2)))))
        growth_bound = 4 * d * math.log(1 / theta) + 4 * d * sum(
            2.0 ** -l * math.log(1.0 / omega_from_epsilons(eps, 2 ** l)) for l in range(1, L + 1))
        growth = max((math.log(v) / sum(a) for a, v in tree.delta.items()
                      if sum(a) >= 2 and v > 0), default=0.0)
        stage_reports.append({
            "counting_excess": worst, "counting_witness": wit,
            "h_bound_ratio": h_ratio, "scale": s,
            "growth": growth, "growth_bound": growth_bound,
            "n_nodes": len(tree.parts),
        })
    report["stages"] = stage_reports
    return report
