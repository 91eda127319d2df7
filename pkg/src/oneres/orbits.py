"""Orbit iteration, asymptotics along orbits and the stable-orbit trichotomy."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .basins import BasinParams, basin_codes, circle_distance
from .errors import NotInBasin, PreconditionError
from .germs import GermSpec

HYPERPLANE_TOL = 1e-14


def log_schedule(n_max: int, growth: float = 1.1) -> np.ndarray:
    """{floor(growth^m)} together with 0 and n_max."""
    out = {0, n_max}
    x = 1.0
    while x <= n_max:
        out.add(int(math.floor(x)))
        x *= growth
    return np.array(sorted(out))


@dataclass
class OrbitTrace:
    n: np.ndarray
    z: np.ndarray
    n_last: int
    k: int
    left_ball: bool = False
    hyperplane: int | None = None  # 0-based index of a coordinate that stayed below the threshold
    window_n: np.ndarray | None = None
    window_z: np.ndarray | None = None

    @property
    def u(self) -> np.ndarray:
        return np.prod(self.z, axis=1)

    @property
    def U(self) -> np.ndarray:
        u = self.u
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(u != 0, u ** (-self.k), np.nan + 0j)

    def rows(self):
        """CSV rows: n, Re/Im z^j, |u|, arg u, Re U, Im U."""
        u, U = self.u, self.U
        for i, n in enumerate(self.n):
            row = [int(n)]
            for x in self.z[i]:
                row += [x.real, x.imag]
            row += [abs(u[i]), float(np.angle(u[i])), U[i].real, U[i].imag]
            yield row

    def header(self) -> list[str]:
        d = self.z.shape[1]
        cols = ["n"]
        for j in range(1, d + 1):
            cols += [f"re_z{j}", f"im_z{j}"]
        return cols + ["abs_u", "arg_u", "re_U", "im_U"]


@njit(cache=True)
def _run_kernel(Z0, lam, k, K, exps, comps, coefs, n_max, ball2, ckpts, win_lo, win_hi):
    """Iterate each orbit independently; record states at the sorted checkpoints and on [win_lo, win_hi]."""
    N, d = Z0.shape
    C = ckpts.shape[0]
    nw = max(0, win_hi - win_lo + 1)
    states = np.empty((C, N, d), dtype=np.complex128)
    wins = np.empty((nw if N == 1 else 0, d), dtype=np.complex128)
    exit_step = np.full(N, -1, dtype=np.int64)
    small = np.ones((N, d), dtype=np.bool_)
    T = exps.shape[0]
    z = np.empty(d, dtype=np.complex128)
    w = np.empty(d, dtype=np.complex128)
    for i in range(N):
        for j in range(d):
            z[j] = Z0[i, j]
            if abs(z[j]) >= 1e-14:
                small[i, j] = False
        c = 0
        while c < C and ckpts[c] == 0:
            for j in range(d):
                states[c, i, j] = z[j]
            c += 1
        if N == 1 and win_lo == 0 and nw > 0:
            for j in range(d):
                wins[0, j] = z[j]
        for n in range(1, n_max + 1):
            u = 1.0 + 0.0j
            for j in range(d):
                u *= z[j]
            uk = u
            for _ in range(k - 1):
                uk *= u
            f = 1.0 - uk / K
            for j in range(d):
                w[j] = lam[j] * z[j] * f
            for t in range(T):
                mono = coefs[t]
                for j in range(d):
                    e = exps[t, j]
                    for _ in range(e):
                        mono *= z[j]
                w[comps[t]] += mono
            nrm2 = 0.0
            for j in range(d):
                z[j] = w[j]
                nrm2 += w[j].real * w[j].real + w[j].imag * w[j].imag
                if small[i, j] and abs(w[j]) >= 1e-14:
                    small[i, j] = False
            if not nrm2 <= ball2:
                exit_step[i] = n
                while c < C:
                    for j in range(d):
                        states[c, i, j] = z[j]
                    c += 1
                break
            while c < C and ckpts[c] == n:
                for j in range(d):
                    states[c, i, j] = z[j]
                c += 1
            if N == 1 and win_lo <= n <= win_hi:
                for j in range(d):
                    wins[n - win_lo, j] = z[j]
        while c < C:
            for j in range(d):
                states[c, i, j] = z[j]
            c += 1
    return states, exit_step, small, wins


def _kernel_args(germ: GermSpec):
    terms = list(germ.tail.terms())
    d = germ.d
    exps = np.array([a for a, _, _ in terms], dtype=np.int64).reshape(len(terms), d)
    comps = np.array([j for _, j, _ in terms], dtype=np.int64)
    coefs = np.array([v for _, _, v in terms], dtype=np.complex128)
    return germ.lambdas.astype(np.complex128), germ.k, float(germ.K), exps, comps, coefs


def run_orbits(germ: GermSpec, Z0, n_max: int, ball: float = math.inf, retain=None,
               window: tuple[int, int] | None = None):
    """Compiled batch iteration.

    Returns (checkpoints, states[C, N, d], exit_step[N], small[N, d], window_states).
    Orbits that leave the ball are frozen at their first outside point; exit_step
    is -1 for orbits that stayed.  ``small[i, j]`` records |z_n^j| < 1e-14 for all n.
    """
    if n_max < 1:
        raise PreconditionError("n_max must be >= 1")
    Z0 = np.ascontiguousarray(np.atleast_2d(np.asarray(Z0, dtype=np.complex128)))
    ck = log_schedule(n_max) if retain is None else np.unique(np.asarray(retain, dtype=np.int64))
    ck = np.union1d(ck[ck <= n_max], [n_max]).astype(np.int64)
    lo, hi = (window if window is not None else (1, 0))
    hi = min(hi, n_max)
    states, exit_step, small, wins = _run_kernel(
        Z0, *_kernel_args(germ), int(n_max), float(ball) ** 2 if math.isfinite(ball) else math.inf,
        ck, int(lo), int(hi))
    return ck, states, exit_step, small, wins


def iterate_orbit(germ: GermSpec, z0, n_max: int, ball: float = math.inf, growth: float = 1.1,
                  window: tuple[int, int] | None = None) -> OrbitTrace:
    """Iterate one start point with logarithmic retention; ``window`` keeps every point in [n1, n2]."""
    if n_max < 1:
        raise PreconditionError("n_max must be >= 1")
    ck = log_schedule(n_max, growth)
    ck, states, exit_step, small, wins = run_orbits(germ, z0, n_max, ball, ck, window)
    zs = states[:, 0, :]
    last = int(exit_step[0]) if exit_step[0] >= 0 else n_max
    keep = ck <= last
    ns, zs = list(ck[keep]), list(zs[keep])
    if exit_step[0] >= 0 and ns[-1] != last:
        ns.append(last)
        zs.append(states[-1, 0, :])
    hyper = next((j for j in range(germ.d) if small[0, j]), None)
    tr = OrbitTrace(np.array(ns), np.array(zs, dtype=complex), last, germ.k, exit_step[0] >= 0, hyper)
    if window is not None:
        lo = window[0]
        hi = min(window[1], last if exit_step[0] < 0 else last - 1)
        tr.window_n = np.arange(lo, hi + 1)
        tr.window_z = wins[: len(tr.window_n)]
    return tr


def iterate_batch(germ: GermSpec, Z0, n_max: int, ball: float = math.inf, retain=None,
                  callback=None):
    """Iterate many start points at once.

    ``callback(n, Z, alive)`` is called at every retained n (default: the log
    schedule) with the state array and the mask of orbits still inside the
    ball. Returns (Z_final, exit_step) where exit_step is -1 for orbits that stayed.
    """
    ck, states, exit_step, _, _ = run_orbits(germ, Z0, n_max, ball, retain)
    if callback is not None:
        for c, n in enumerate(ck):
            alive = (exit_step < 0) | (exit_step > n)
            callback(int(n), states[c], alive)
    return states[-1], exit_step


# asymptotics -------------------------------------------------------------------------

def _require_sector(trace: OrbitTrace, h: int):
    k = trace.k
    u = trace.u[-1]
    if trace.left_ball or u == 0 or circle_distance(np.angle(u), 2 * np.pi * h / k) > np.pi / (2 * k):
        raise NotInBasin(f"orbit did not settle into sector {h}")


def check_asymptotics(trace: OrbitTrace, h: int, window=(1000, None)) -> dict:
    """sup |n^{1/k} u_n - zeta_k^h| on the window and the range of |z_n^j| n^{1/(kd)}."""
    _require_sector(trace, h)
    k, d = trace.k, trace.z.shape[1]
    n1 = window[0]
    n2 = trace.n_last if window[1] is None else window[1]
    sel = (trace.n >= n1) & (trace.n <= n2)
    if not sel.any():
        raise PreconditionError("no retained points in the window")
    n = trace.n[sel].astype(float)
    zeta = np.exp(2j * np.pi * h / k)
    err = np.abs(n ** (1 / k) * trace.u[sel] - zeta)
    scaled = np.abs(trace.z[sel]) * (n ** (1 / (k * d)))[:, None]
    return {
        "final_error": float(err[-1]),
        "sup_error": float(err.max()),
        "ratio_min": scaled.min(axis=0).tolist(),
        "ratio_max": scaled.max(axis=0).tolist(),
        "n_final": int(n[-1]),
    }


def direction_accumulation(trace: OrbitTrace, h: int, tail_from: int | None = None) -> dict:
    """Limit direction moduli, arg-sum deviation and circle-gap of arg z^j on the tail window."""
    _require_sector(trace, h)
    k = trace.k
    if trace.window_z is not None and len(trace.window_z):
        wn, wz = trace.window_n, trace.window_z
    else:
        start = tail_from if tail_from is not None else trace.n_last // 10
        sel = trace.n >= start
        wn, wz = trace.n[sel], trace.z[sel]
    zl = trace.z[-1]
    v = np.abs(zl) / np.linalg.norm(zl)
    dev = circle_distance(np.angle(np.prod(zl)), 2 * np.pi * h / k)
    gaps = []
    for j in range(1, wz.shape[1]):
        a = np.sort(np.mod(np.angle(wz[:, j]), 2 * np.pi))
        g = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
        gaps.append(float(g.max()))
    # rank check on a few well-spread normalised directions
    dirs = wz / np.linalg.norm(wz, axis=1, keepdims=True)
    d = wz.shape[1]
    best = math.inf
    idx = np.linspace(0, len(dirs) - 1, min(len(dirs), 64)).astype(int)
    rng = np.random.default_rng(0)
    for _ in range(200):
        pick = rng.choice(idx, size=d, replace=False) if len(idx) >= d else idx
        M = dirs[pick].T
        if M.shape[1] < d:
            break
        best = min(best, float(np.linalg.cond(M)))
    return {"v": v.tolist(), "argsum_deviation": float(dev), "max_gap": gaps,
            "direction_cond": best, "window": (int(wn[0]), int(wn[-1]))}


# classification ---------------------------------------------------------------------------

@dataclass
class OrbitVerdict:
    kind: str  # Basin | SiegelHyperplane | Escaped | Undecided
    index: int | None = None  # h for Basin, 1-based j for SiegelHyperplane
    first_entry: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def __str__(self):
        return self.kind if self.index is None else f"{self.kind}({self.index})"


KINDS = ("Basin", "SiegelHyperplane", "Escaped", "Undecided")


def classify_batch(germ: GermSpec, Z0, r: float, n_max: int, params: BasinParams):
    """Vectorised trichotomy. Returns (kind codes 0..3, index array, first entry array)."""
    Z0 = np.asarray(Z0, dtype=complex)
    N, d, k = len(Z0), germ.d, germ.k
    pars = [params.with_h(h) for h in range(k)]
    entry = np.full((k, N), -1, dtype=np.int64)
    broken = np.zeros((k, N), dtype=bool)

    def cb(n, Z, alive):
        for h, p in enumerate(pars):
            ins = (basin_codes(Z, p) == 0) & alive
            new = ins & (entry[h] < 0)
            entry[h][new] = n
            broken[h] |= (entry[h] >= 0) & ~ins & alive

    start_out = np.linalg.norm(Z0, axis=1) > r
    ck, states, exit_step, small_nk, _ = run_orbits(germ, Z0, n_max, r)
    for c, n in enumerate(ck):
        cb(int(n), states[c], (exit_step < 0) | (exit_step > n))
    small = small_nk.T
    kind = np.full(N, 3, dtype=np.int8)
    index = np.full(N, -1, dtype=np.int64)
    first = np.full(N, -1, dtype=np.int64)
    for h in range(k):
        ok = (entry[h] >= 0) & ~broken[h]
        kind[ok] = 0
        index[ok] = h
        first[ok] = entry[h][ok]
    on_plane = small.any(axis=0)
    plane_j = np.argmax(small, axis=0)
    sel = on_plane & (kind == 3)
    kind[sel] = 1
    index[sel] = plane_j[sel] + 1
    esc = (exit_step >= 0) | start_out
    kind[esc] = 2
    index[esc] = -1
    first[esc] = exit_step[esc]
    return kind, index, first


def classify_stable_orbit(germ: GermSpec, z0, r: float, n_max: int, params: BasinParams) -> OrbitVerdict:
    kind, index, first = classify_batch(germ, np.asarray(z0, dtype=complex)[None, :], r, n_max, params)
    c = int(kind[0])
    idx = int(index[0]) if index[0] >= 0 else None
    fe = int(first[0]) if first[0] >= 0 else None
    return OrbitVerdict(KINDS[c], idx, fe)
