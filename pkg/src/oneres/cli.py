"""Command line: oneres <subcommand> [--config PATH] [--seed N] [--out DIR] [--tol NAME=VAL]."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import basins, cycles, elimination, fatou, orbits, suites
from .config import load_config, parse_tol
from .errors import ConfigInvalid, NeverEntersBasin, NotInBasin, OneresError, PreconditionError, SuiteFailed
from .germs import evaluate, germ_from_json, make_multipliers, make_normal_form
from .suites import write_csv, write_json

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _points(spec: str | None, d: int) -> np.ndarray:
    """Points from a CSV/JSON file, or inline as 'z1,z2;z1,z2' with Python complex literals."""
    if spec is None:
        raise ConfigInvalid("no points given")
    path = Path(spec)
    if path.exists():
        if path.suffix == ".json":
            doc = json.loads(path.read_text())
            pts = [[complex(*c) if isinstance(c, list) else complex(c) for c in row] for row in doc]
        else:
            with open(path, newline="") as fh:
                rows = list(csv.DictReader(fh))
            pts = [[complex(float(r[f"re_z{j}"]), float(r[f"im_z{j}"])) for j in range(1, d + 1)]
                   for r in rows]
    else:
        try:
            pts = [[complex(x.strip().replace(" ", "")) for x in p.split(",")] for p in spec.split(";") if p]
        except ValueError as e:
            raise ConfigInvalid(f"cannot parse points {spec!r}") from e
    Z = np.asarray(pts, dtype=complex)
    if Z.ndim != 2 or Z.shape[1] != d:
        raise ConfigInvalid(f"points must have {d} coordinates")
    return Z


def _germ_arg(cfg, path):
    if path is None:
        return cfg.germ()
    try:
        return germ_from_json(Path(path).read_text())
    except OSError as e:
        raise ConfigInvalid(f"cannot read {path}: {e}") from e


def cmd_germ(cfg, a):
    if a.d is not None or a.k is not None:
        base = cfg.raw["germ"]
        d = a.d if a.d is not None else base.get("d", 2)
        k = a.k if a.k is not None else base.get("k", 1)
        germ = make_normal_form(make_multipliers(d, a.scheme, k=k), k)
    else:
        germ = cfg.germ()
    doc = germ.to_json_dict()
    path = write_json(cfg.out / "germ.json", doc)
    print(json.dumps(doc))
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_orbit(cfg, a):
    germ = _germ_arg(cfg, a.germ)
    o = cfg.section("orbit")
    Z = _points(a.points, germ.d)
    n_max = a.n_max or int(o["n_max"])
    R, _ = suites._certified(cfg, germ)
    b = cfg.section("basin")
    params = basins.BasinParams(germ.d, germ.k, 0, R, b["theta"], b["beta"])
    kind, index, first = orbits.classify_batch(germ, Z, float(o["ball"]), n_max, params)
    verdicts = []
    for i, z in enumerate(Z):
        tr = orbits.iterate_orbit(germ, z, n_max, float(o["ball"]))
        write_csv(cfg.out / f"orbit_{i}.csv", tr.header(), tr.rows())
        v = {"start": z, "kind": orbits.KINDS[kind[i]], "index": int(index[i]) if index[i] >= 0 else None,
             "first_entry": int(first[i]) if first[i] >= 0 else None}
        if kind[i] == 0:
            v["asymptotics"] = orbits.check_asymptotics(tr, int(index[i]), (min(1000, n_max), None))
        verdicts.append(v)
    write_json(cfg.out / "verdicts.json", verdicts)
    for v in verdicts:
        print(v["kind"] if v["index"] is None else f"{v['kind']}({v['index']})")
    return EXIT_OK


def cmd_basin(cfg, a):
    germ = _germ_arg(cfg, a.germ)
    b = cfg.section("basin")
    cert = basins.find_R0(germ, b["theta"], b["beta"], a.samples or int(cfg.section("samples")["invariance"]),
                          seed=cfg.seed)
    write_json(cfg.out / "certificate.json", cert.to_json_dict())
    k = germ.k
    mods, args = [], []
    for h in range(k):
        p = basins.BasinParams(germ.d, k, h, cert.R0, b["theta"], b["beta"])
        m_, a_ = basins.polar_sample(p, int(cfg.section("samples")["atlas"]), seed=cfg.seed + h)
        mods.append(m_)
        args.append(a_)
    d = germ.d
    write_csv(cfg.out / "modulus.csv", [f"r{j}" for j in range(1, d + 1)], np.vstack(mods).tolist())
    header = ["s", "t", "h"] if d == 2 else [f"s{j}" for j in range(1, d + 1)] + ["h"]
    write_csv(cfg.out / "argument.csv", header, [list(r[:-1]) + [int(r[-1])] for r in np.vstack(args)])
    print(f"R0 = {cert.R0:g}")
    return EXIT_OK


def cmd_fatou(cfg, a):
    germ = _germ_arg(cfg, a.germ)
    Z = _points(a.points, germ.d)
    tol = a.depth_tol or (cfg.tol["fatou_depth_perturbed"] if germ.tail.coefficients else cfg.tol["fatou_depth"])
    b0 = fatou.fatou_batch(germ, Z, tol=tol)
    b1 = fatou.fatou_batch(germ, evaluate(germ, Z), tol=tol)
    K = germ.K
    lam = germ.lambdas
    abel = np.abs(b1.psi - b0.psi - 1)
    factor = (b0.psi / (b0.psi + 1)) ** (1.0 / K)
    sig_res = np.abs(b1.sigma - lam * b0.sigma * factor[:, None]).max(axis=1)
    tau_res = np.abs(b1.tau - lam * b0.tau).max(axis=1)
    header = ["i", "re_psi", "im_psi", "depth", "est_error"]
    for j in range(1, germ.d + 1):
        header += [f"re_sigma{j}", f"im_sigma{j}", f"re_tau{j}", f"im_tau{j}"]
    header += ["abel_residual", "sigma_residual", "tau_residual"]
    rows = []
    for i in range(len(Z)):
        row = [i, b0.psi[i].real, b0.psi[i].imag, b0.depth[i], b0.psi_error[i]]
        for j in range(germ.d):
            row += [b0.sigma[i, j].real, b0.sigma[i, j].imag, b0.tau[i, j].real, b0.tau[i, j].imag]
        rows.append(row + [abel[i], sig_res[i], tau_res[i]])
    path = write_csv(cfg.out / "fatou.csv", header, rows)
    print(f"max residuals: abel {abel.max():.3g}, sigma {sig_res.max():.3g}, tau {tau_res.max():.3g}")
    print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_eliminate(cfg, a):
    D = a.degree or int(cfg.section("elimination")["degree"])
    if a.germ is None:
        germ, levels, A0 = suites.elimination_example(cfg.seed + 1, D)
    else:
        germ = _germ_arg(cfg, a.germ)
        A0, levels = None, None
    if a.preset == "nicer-tail":
        res = elimination.nicer_tail_preset(germ, D)
    else:
        if levels is None:
            top = germ.l - 1
            A0 = elimination.ExponentSet.low_order(top)
            levels = [elimination.ExponentSet.min_level(m, top) for m in range(0, D // germ.d + 1)]
        res = elimination.iterated_elimination(germ, levels, D, A0=A0)
    doc = {"germ": germ.to_json_dict(), **res.to_json_dict()}
    write_json(cfg.out / "conjugation.json", doc)
    lines = [f"degree cap: {D}", f"series residual: {res.residual:.3e}",
             f"max eliminated |g|: {res.max_eliminated():.3e}", f"divisor floor: {res.divisor_floor:.3e}",
             f"stages: {len(res.stages)}"]
    if res.survivors:
        lines.append(f"survivors: {len(res.survivors)}")
    lines += [f"note: {n}" for n in res.notes]
    (cfg.out / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_cycle(cfg, a):
    germ = _germ_arg(cfg, a.germ) if a.germ else None
    c = cfg.section("cycle")
    if germ is None:
        k = int(c["k"])
        germ = make_normal_form(make_multipliers(2, k=k), k)
    p = a.p or int(c["p"])
    root = cycles.make_root_germ(germ, p)
    ver = cycles.verify_root(root)
    b = cfg.section("basin")
    theta = min(b["theta"], 0.9 * np.pi / (2 * germ.k))
    params = basins.BasinParams(germ.d, germ.k, 0, 4.0, theta, b["beta"])
    perm = cycles.basin_permutation_check(root, params, float(c["r"]), int(c["samples"]), seed=cfg.seed)
    write_json(cfg.out / "root.json", root.to_json_dict())
    write_json(cfg.out / "verification.json", {"verify": ver, "permutation": perm})
    write_csv(cfg.out / "permutation.csv", ["h", "image_h", "success"],
              [[h, perm["permutation"][h], perm["success"][h]] for h in range(germ.k)])
    print(f"max deviation {ver['max_deviation']:.3e}; permutation {perm['permutation']}")
    return EXIT_OK


def cmd_brjuno(cfg, a):
    cap = a.cap or int(cfg.section("brjuno")["cap"])
    germ = cfg.germ()
    d = germ.d
    if a.set == "non-resonant":
        A = elimination.ExponentSet(lambda x: sum(x) >= 2 and not any(elimination.is_resonant(x, i, germ.k)
                                                                      for i in range(d)))
    elif a.set.startswith("level"):
        A = elimination.ExponentSet.level_set(int(a.set[5:] or 1), d)
    else:
        raise ConfigInvalid("--set must be non-resonant or levelK")
    br = elimination.brjuno_omega(germ.multipliers, A, cap)
    S, inc, decaying = elimination.brjuno_partial_sums(br)
    rows = [[m, br.omega_values[i], S[i], inc[i]] for i, m in enumerate(br.levels)]
    write_csv(cfg.out / "brjuno.csv", ["m", "omega", "partial_sum", "increment"], rows)
    write_json(cfg.out / "brjuno.json", {"levels": br.levels, "omega": br.omega_values,
                                         "witnesses": [list(w[0]) + [w[1] + 1] if w else None
                                                       for w in br.witnesses],
                                         "partial_sums": S, "increments": inc, "decaying": decaying})
    for r in rows:
        print(",".join(suites._fmt(x) for x in r))
    return EXIT_OK


def cmd_plot(cfg, a):
    start = _points(a.start, cfg.germ().d)[0] if a.start else None
    for p in suites.emit_plotdata(a.kind, cfg, k=a.k, start=start):
        print(p)
    return EXIT_OK


def cmd_suite(cfg, a):
    names = suites.SUITES if a.name == "all" else [a.name]
    status = EXIT_OK
    for name in names:
        try:
            rep = suites.run_experiment(cfg, name)
            print(f"{name}: PASS")
            for c in rep.checks:
                print(f"  {c.name}: {c.value:.6g} (tol {c.tol:.3g})")
        except SuiteFailed as e:
            print(f"{name}: FAIL {e}")
            for c in e.report.checks:
                print(f"  [{'ok' if c.passed else 'FAIL'}] {c.name}: {c.value:.6g} (tol {c.tol:.3g}) {c.detail}")
            status = EXIT_FAIL
    return status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--tol", action="append", metavar="NAME=VAL", help="override a tolerance")

    ap = argparse.ArgumentParser(prog="oneres", description="One-resonant germs: basins, Fatou coordinates, "
                                                          "elimination and cycles.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("germ", parents=[common], help="emit a germ JSON")
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--scheme", default="default")
    p.set_defaults(func=cmd_germ)

    p = sub.add_parser("orbit", parents=[common], help="iterate and classify start points")
    p.add_argument("--germ")
    p.add_argument("--points", required=True, help="CSV/JSON file or 'z1,z2;z1,z2'")
    p.add_argument("--n-max", type=int)
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("basin", parents=[common], help="certify R0 and emit polar tables")
    p.add_argument("--germ")
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_basin)

    p = sub.add_parser("fatou", parents=[common], help="evaluate psi, sigma, tau and their residuals")
    p.add_argument("--germ")
    p.add_argument("--points", required=True)
    p.add_argument("--depth-tol", type=float)
    p.set_defaults(func=cmd_fatou)

    p = sub.add_parser("eliminate", parents=[common], help="run the homological elimination")
    p.add_argument("--germ")
    p.add_argument("--degree", type=int)
    p.add_argument("--preset", choices=["levels", "nicer-tail"], default="levels")
    p.set_defaults(func=cmd_eliminate)

    p = sub.add_parser("cycle", parents=[common], help="root germ, verification and basin permutation")
    p.add_argument("--germ")
    p.add_argument("--p", type=int)
    p.set_defaults(func=cmd_cycle)

    p = sub.add_parser("brjuno", parents=[common], help="omega_A(2^m) and partial sums")
    p.add_argument("--cap", type=int)
    p.add_argument("--set", default="non-resonant")
    p.set_defaults(func=cmd_brjuno)

    p = sub.add_parser("plot", parents=[common], help="emit plot data (CSV only)")
    p.add_argument("--kind", choices=suites.PLOT_KINDS, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--start")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("suite", parents=[common], help="run a named suite")
    p.add_argument("name", choices=list(suites.SUITES) + ["all"])
    p.set_defaults(func=cmd_suite)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        cfg = load_config(a.config, a.seed, a.out, parse_tol(a.tol))
        cfg.out.mkdir(parents=True, exist_ok=True)
        return a.func(cfg, a)
    except (ConfigInvalid, PreconditionError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SuiteFailed as e:
        print(f"suite failed: {e}", file=sys.stderr)
        return EXIT_FAIL
    except (NotInBasin, NeverEntersBasin, OneresError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
