"""Named experiment suites and plot-data emitters used by the command line."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import basins, cycles, elimination, fatou, orbits
from .config import ExperimentConfig
from .errors import ConfigInvalid, OneresError, PreconditionError, SuiteFailed, ZeroDivisor
from .germs import GermSpec, evaluate, make_multipliers, make_normal_form, make_perturbed
from .series import TruncatedSeriesMap, random_series

SUITES = ("asymptotics", "basin-invariance", "fatou-equations", "elimination", "cycles", "brjuno", "atlas")


# output helpers ----------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=",", lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def write_json(path: Path, doc) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool
    detail: str = ""


@dataclass
class SuiteReport:
    name: str
    checks: list = field(default_factory=list)
    data: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    def check(self, name, value, tol, passed=None, detail=""):
        value = float(value)
        ok = (value < tol) if passed is None else bool(passed)
        self.checks.append(Check(name, value, float(tol), ok, detail))
        return ok

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def first_failure(self) -> Check | None:
        return next((c for c in self.checks if not c.passed), None)

    def to_json_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed,
                "checks": [c.__dict__ for c in self.checks], "data": self.data,
                "artifacts": [str(Path(a).name) for a in self.artifacts]}


# shared constructions ------------------------------------------------------------------------

def perturbed_example(d: int = 2, k: int = 1, coef: float = 1e-2) -> GermSpec:
    """F_N plus coef * z^{(l/2)alpha} e_1 with l = 2kd + 2 (the lowest admissible order)."""
    base = make_normal_form(make_multipliers(d, k=k), k)
    l = 2 * k * d + 2
    alpha = tuple([l // d] * d) if l % d == 0 else tuple([l // d + (i < l % d) for i in range(d)])
    tail = TruncatedSeriesMap.from_terms(d, l, [(alpha, 0, coef)])
    return make_perturbed(base, tail, l)


def elimination_example(seed: int = 1, D: int = 12) -> tuple[GermSpec, list, elimination.ExponentSet]:
    """Random degree 6..8 tail on the d=2, k=1 model with the min-level partition through D."""
    base = make_normal_form(make_multipliers(2), 1)
    tail = random_series(np.random.default_rng(seed), 2, 8, min_degree=6, scale=1e-2)
    germ = make_perturbed(base, tail, 6)
    levels = [elimination.ExponentSet(lambda a, m=m: sum(a) >= 6 and min(a) == m - 1, f"min={m - 1}")
              for m in range(1, 4)]
    return germ, levels, elimination.ExponentSet.low_order(5)


def sector_starts(k: int, per_sector: int, r: float | None = None, seed=0) -> np.ndarray:
    """Balanced starts (r e^{i s}, ..., r e^{i(2 pi h/k - sum s)}) with mild modulus and angle noise, d = 2.

    The default r = 0.05^(1/k) keeps |U_0| near 400 for every k, so the
    asymptotic regime is reached well before n = 10^5.
    """
    r = 0.05 ** (1 / k) if r is None else r
    rng = np.random.default_rng(seed)
    out = []
    for h in range(k):
        s = rng.uniform(-np.pi, np.pi, per_sector)
        jitter = 0.1 * rng.standard_normal(per_sector)
        mod = r * np.exp(0.2 * rng.standard_normal((per_sector, 2)))
        z1 = mod[:, 0] * np.exp(1j * s)
        z2 = mod[:, 1] * np.exp(1j * (2 * np.pi * h / k - s + jitter))
        out.append(np.column_stack([z1, z2]))
    return np.vstack(out)


def exhaustive_omega(angles, A, cap: int) -> np.ndarray:
    """omega_A(2^m), m = 1..log2 cap, from a single dense scan over all exponents (d = 2); capped at 1."""
    th = np.asarray(angles, dtype=float)
    if len(th) != 2:
        raise PreconditionError("exhaustive scan is written for d = 2")
    a1, a2 = np.meshgrid(np.arange(cap + 1), np.arange(cap + 1), indexing="ij")
    deg = a1 + a2
    member = np.zeros_like(deg, dtype=bool)
    for i in range(cap + 1):
        for j in range(cap + 1 - i):
            member[i, j] = i + j >= 2 and (i, j) in A
    best = np.full(deg.shape, np.inf)
    for t in th:
        x = a1 * th[0] + a2 * th[1] - t
        best = np.minimum(best, 2 * np.abs(np.sin(np.pi * (x - np.round(x)))))
    best[~member] = np.inf
    M = int(math.floor(math.log2(cap)))
    return np.array([min(1.0, best[(deg >= 2) & (deg <= 2 ** m)].min()) for m in range(1, M + 1)])


def _certified(cfg: ExperimentConfig, germ: GermSpec, theta=None, beta=None, samples=None):
    b = cfg.section("basin")
    theta = b["theta"] if theta is None else theta
    beta = b["beta"] if beta is None else beta
    if b.get("R"):
        return float(b["R"]), None
    cert = basins.find_R0(germ, theta, beta, samples or 2000, seed=cfg.seed)
    return cert.R0, cert


def _tightened(germ: GermSpec, R: float, theta: float, beta: float) -> basins.BasinParams:
    """Smaller region for perturbed germs: R doubled, theta halved, beta moved half way to 1/d."""
    if germ.tail.coefficients:
        return basins.BasinParams(germ.d, germ.k, 0, 2 * R, theta / 2, (beta + 1 / germ.d) / 2)
    return basins.BasinParams(germ.d, germ.k, 0, R, theta, beta)


# suites --------------------------------------------------------------------------------

def suite_asymptotics(cfg: ExperimentConfig, rep: SuiteReport):
    germ = cfg.germ()
    if germ.d != 2:
        raise ConfigInvalid("asymptotics suite uses d = 2 start points")
    o, tol = cfg.section("orbit"), cfg.tol
    n_max = int(o["n_max"])
    k = germ.k
    Z = sector_starts(k, int(o["starts_per_sector"]), seed=cfg.seed)
    ball = max(float(o["ball"]), 2.5 * 0.05 ** (1 / k))
    ck = orbits.log_schedule(n_max)
    ck, states, exit_step, _, _ = orbits.run_orbits(germ, Z, n_max, ball, ck)
    sel = ck >= min(1000, n_max)
    n = ck[sel].astype(float)
    hs = np.repeat(np.arange(k), int(o["starts_per_sector"]))
    zeta = np.exp(2j * np.pi * hs / k)
    u_final = np.prod(states[-1], axis=1)
    err = np.abs(n_max ** (1 / k) * u_final - zeta)
    ratio = np.abs(states[sel]) * (n ** (1 / (k * germ.d)))[:, None, None]
    rep.check("escaped", int((exit_step >= 0).sum()), 1, detail="orbits that left the ball")
    rep.check("final |n^(1/k) u_n - zeta^h|", err.max(), tol["asymptotics"])
    rep.check("ratio min", ratio.min(), tol["ratio_low"], passed=ratio.min() >= tol["ratio_low"],
              detail="|z^j| n^(1/kd) must stay above the lower bound")
    rep.check("ratio max", ratio.max(), tol["ratio_high"])
    tr = orbits.iterate_orbit(germ, Z[0], n_max, ball)
    rep.artifacts.append(write_csv(cfg.out / "asymptotics" / "orbit.csv", tr.header(), tr.rows()))
    rep.data.update({"n_max": n_max, "final_errors": err, "ratio_range": [ratio.min(), ratio.max()]})


def suite_basin_invariance(cfg: ExperimentConfig, rep: SuiteReport):
    germ = cfg.germ()
    b = cfg.section("basin")
    ns = int(cfg.section("samples")["invariance"])
    cert = basins.find_R0(germ, b["theta"], b["beta"], ns, seed=cfg.seed)
    rep.artifacts.append(write_json(cfg.out / "basin-invariance" / "certificate.json", cert.to_json_dict()))
    R = float(b["R"]) if b.get("R") else cert.R0
    for h in range(germ.k):
        p = basins.BasinParams(germ.d, germ.k, h, R, b["theta"], b["beta"])
        z = basins.sample_basin(p, ns, seed=cfg.seed + 1000 + h)
        inside, _ = basins.invariance_margin(germ, p, z)
        rep.check(f"F(B_{h}) in B_{h}", inside.mean(), 1.0, passed=inside.all(), detail="success fraction")
    if germ.k > 1:
        for h in range(germ.k):
            z = basins.sample_basin(basins.BasinParams(germ.d, germ.k, h, R, b["theta"], b["beta"]), ns // 10,
                                    seed=cfg.seed + 2000 + h)
            others = [basins.basin_codes(z, basins.BasinParams(germ.d, germ.k, g, R, b["theta"], b["beta"])) == 0
                      for g in range(germ.k) if g != h]
            hits = int(np.sum(others))
            rep.check(f"B_{h} disjoint from other sectors", hits, 1)
    rep.data["R0"] = cert.R0


def suite_fatou(cfg: ExperimentConfig, rep: SuiteReport):
    germ = cfg.germ()
    b, tol = cfg.section("basin"), cfg.tol
    R, _ = _certified(cfg, germ)
    p = _tightened(germ, R, b["theta"], b["beta"])
    Z = basins.sample_basin(p, int(cfg.section("samples")["fatou"]), seed=cfg.seed)
    dtol = tol["fatou_depth_perturbed"] if germ.tail.coefficients else tol["fatou_depth"]
    fb0 = fatou.fatou_batch(germ, Z, tol=dtol)
    fb1 = fatou.fatou_batch(germ, evaluate(germ, Z), tol=dtol)
    abel = np.abs(fb1.psi - fb0.psi - 1)
    lam = germ.lambdas
    tau_res = np.abs(fb1.tau - lam * fb0.tau).max(axis=1)
    rep.check("Abel residual", abel.max(), tol["abel"])
    rep.check("tau residual", tau_res.max(), tol["tau"])
    rep.check("min Re psi", fb0.psi.real.min(), 0.0, passed=fb0.psi.real.min() > 0)
    Zc = fatou.cylinder_samples(germ, p, 100, seed=cfg.seed)
    v0, _ = fatou.global_coordinate_batch(germ, Zc, p, tol=dtol)
    v1, _ = fatou.global_coordinate_batch(germ, evaluate(germ, Zc), p, tol=dtol)
    e0, e1 = fatou.cylinder_batch(v0, germ.multipliers), fatou.cylinder_batch(v1, germ.multipliers)
    shift = np.zeros(germ.d)
    shift[0] = 1
    rep.check("cylinder residual", np.abs(e1 - e0 - shift).max(), tol["cylinder"])
    rows = [[i, fb0.psi[i].real, fb0.psi[i].imag, fb0.depth[i], fb0.psi_error[i], abel[i], tau_res[i]]
            for i in range(len(Z))]
    rep.artifacts.append(write_csv(cfg.out / "fatou-equations" / "residuals.csv",
                                   ["i", "re_psi", "im_psi", "depth", "est_error", "abel_residual",
                                    "tau_residual"], rows))


def suite_elimination(cfg: ExperimentConfig, rep: SuiteReport):
    D = int(cfg.section("elimination")["degree"])
    tol = cfg.tol
    germ, levels, A0 = elimination_example(cfg.seed + 1, D)
    res = elimination.iterated_elimination(germ, levels, D, A0=A0)
    rng = np.random.default_rng(cfg.seed)
    z = rng.standard_normal((200, 2)) + 1j * rng.standard_normal((200, 2))
    z *= 1e-2 * rng.random((200, 1)) / np.linalg.norm(z, axis=1, keepdims=True)
    rep.check("max eliminated |g|", res.max_eliminated(), tol["eliminated"])
    rep.check("series residual", res.residual, tol["series_residual"])
    rep.check("pointwise residual", res.pointwise_residual(z).max(), tol["pointwise"])
    diag = elimination.majorant_diagnostics(2, 20, res)
    rep.check("sigma closed form", diag["sigma_rel_error"], tol["sigma_closed_form"])
    excess = max(s["counting_excess"] for s in diag["stages"])
    rep.check("counting bound excess", excess, 0.0, passed=excess <= 0)
    rep.artifacts.append(write_json(cfg.out / "elimination" / "conjugation.json",
                                    {"germ": germ.to_json_dict(), **res.to_json_dict()}))


def suite_cycles(cfg: ExperimentConfig, rep: SuiteReport):
    c, tol = cfg.section("cycle"), cfg.tol
    k, pp = int(c["k"]), int(c["p"])
    base = make_normal_form(make_multipliers(2, k=k), k)
    root = cycles.make_root_germ(base, pp)
    ver = cycles.verify_root(root)
    rep.check("root^p - F0 coefficient deviation", ver["max_deviation"], tol["root"])
    b = cfg.section("basin")
    theta = min(b["theta"], 0.9 * math.pi / (2 * k))
    params = basins.BasinParams(2, k, 0, 4.0, theta, b["beta"])
    perm = cycles.basin_permutation_check(root, params, float(c["r"]), int(c["samples"]), seed=cfg.seed)
    rep.check("basin permutation", 0 if perm["matches"] else 1, 1, passed=perm["matches"],
              detail=str(perm["permutation"]))
    d = cfg.out / "cycles"
    rep.artifacts.append(write_json(d / "root.json", root.to_json_dict()))
    rep.artifacts.append(write_csv(d / "permutation.csv", ["h", "image_h", "success"],
                                   [[h, perm["permutation"][h], perm["success"][h]] for h in range(k)]))
    rep.data["verify"] = ver


def suite_brjuno(cfg: ExperimentConfig, rep: SuiteReport):
    cap = int(cfg.section("brjuno")["cap"])
    mult = make_multipliers(2)
    A = elimination.ExponentSet.level_set(1, 2)
    br = elimination.brjuno_omega(mult, A, cap)
    oracle = exhaustive_omega(mult.angles, A, cap)
    rep.check("omega vs exhaustive scan", np.abs(br.omega_values - oracle).max(), cfg.tol["brjuno_match"])
    S, inc, decaying = elimination.brjuno_partial_sums(br)
    rep.check("partial-sum increments decrease for m >= 3", 0 if decaying else 1, 1, passed=decaying,
              detail=" ".join(f"{x:.4f}" for x in inc))
    try:
        elimination.brjuno_omega(mult, elimination.ExponentSet.explicit([(2, 1)]), 4)
        raised = False
    except ZeroDivisor:
        raised = True
    rep.check("resonant set raises ZeroDivisor", 0 if raised else 1, 1, passed=raised)
    rows = [[m, br.omega_values[i], S[i], inc[i]] for i, m in enumerate(br.levels)]
    rep.artifacts.append(write_csv(cfg.out / "brjuno" / "omega.csv", ["m", "omega", "partial_sum", "increment"],
                                   rows))


def suite_atlas(cfg: ExperimentConfig, rep: SuiteReport):
    paths = emit_plotdata("modulus", cfg) + emit_plotdata("argument", cfg)
    rep.artifacts.extend(paths)
    rep.check("atlas files", len(paths), 2, passed=len(paths) == 2)


_RUNNERS = {"asymptotics": suite_asymptotics, "basin-invariance": suite_basin_invariance,
            "fatou-equations": suite_fatou, "elimination": suite_elimination, "cycles": suite_cycles,
            "brjuno": suite_brjuno, "atlas": suite_atlas}


def run_experiment(cfg: ExperimentConfig, which: str) -> SuiteReport:
    """Run a suite, write its report; SuiteFailed carries the first failing check."""
    if which not in _RUNNERS:
        raise ConfigInvalid(f"unknown suite {which!r}; choose from {', '.join(SUITES)}")
    rep = SuiteReport(which)
    try:
        _RUNNERS[which](cfg, rep)
    except PreconditionError as e:
        raise ConfigInvalid(str(e)) from e
    write_json(cfg.out / which / "report.json", rep.to_json_dict())
    bad = rep.first_failure()
    if bad is not None:
        err = SuiteFailed(f"{which}: {bad.name} = {bad.value:.6g} (tol {bad.tol:.3g})")
        err.report = rep
        raise err
    return rep


# plot data ---------------------------------------------------------------------------------

PLOT_KINDS = ("modulus", "argument", "orbit", "directions")


def emit_plotdata(kind: str, cfg: ExperimentConfig, k: int | None = None, start=None) -> list[Path]:
    """CSV data for the polar decomposition, a single orbit, or its direction drift."""
    germ = cfg.germ()
    b = cfg.section("basin")
    d = germ.d
    out = cfg.out / "plot"
    if kind in ("modulus", "argument"):
        k = k if k is not None else max(germ.k, 2)
        theta = min(b["theta"], 0.9 * math.pi / (2 * k))
        n = int(cfg.section("samples")["atlas"])
        mods, args = [], []
        for h in range(k):
            p = basins.BasinParams(d, k, h, 0.5, theta, b["beta"])
            m_, a_ = basins.polar_sample(p, n, seed=cfg.seed + h)
            mods.append(m_)
            args.append(a_)
        if kind == "modulus":
            header = [f"r{j}" for j in range(1, d + 1)]
            return [write_csv(out / "modulus.csv", header, np.vstack(mods).tolist())]
        header = ["s", "t", "h"] if d == 2 else [f"s{j}" for j in range(1, d + 1)] + ["h"]
        rows = [list(r[:-1]) + [int(r[-1])] for r in np.vstack(args)]
        return [write_csv(out / "argument.csv", header, rows)]
    if kind not in ("orbit", "directions"):
        raise ConfigInvalid(f"unknown plot kind {kind!r}")
    o = cfg.section("orbit")
    n_max = int(o["n_max"])
    z0 = np.asarray(start if start is not None else [0.05] * d, dtype=complex)
    if kind == "orbit":
        tr = orbits.iterate_orbit(germ, z0, n_max, float(o["ball"]))
        return [write_csv(out / "orbit.csv", tr.header(), tr.rows())]
    lo = max(1, n_max // 10)
    tr = orbits.iterate_orbit(germ, z0, n_max, float(o["ball"]), window=(lo, n_max))
    wz = tr.window_z
    h = int(fatou.sector_of(np.prod(wz[-1]), germ.k))
    dev = basins.circle_distance(np.angle(np.prod(wz, axis=1)), 2 * np.pi * h / germ.k)
    step = max(1, len(wz) // 5000)
    rows = [[int(tr.window_n[i]), float(np.angle(wz[i, 1])), float(dev[i])] for i in range(0, len(wz), step)]
    return [write_csv(out / "directions.csv", ["n", "arg_z2", "argsum_deviation"], rows)]
