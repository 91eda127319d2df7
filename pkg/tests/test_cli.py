import csv
import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from oneres.cli import main
from oneres.config import load_config
from oneres.errors import ConfigInvalid


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_config_rejects_bad_theta(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema_version": 1, "basin": {"theta": math.pi / 2}}))
    with pytest.raises(ConfigInvalid):
        load_config(cfg)
    assert main(["suite", "atlas", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("doc", [{"schema_version": 2}, {"bogus": 1}, {"seed": -1},
                                 {"tolerances": {"abel": 0}}, {"tolerances": {"nope": 1e-3}},
                                 {"germ": {"d": 2, "k": 1, "angles": [0.5, 0.5]}}])
def test_config_errors_exit_2(tmp_path, doc):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema_version": 1, **doc}))
    assert main(["germ", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_tol_flag(tmp_path):
    assert main(["germ", "--tol", "abel=oops", "--out", str(tmp_path)]) == 2
    cfg = load_config(tols={"abel": 1e-9})
    assert cfg.tol["abel"] == 1e-9


def test_germ_round_trip(tmp_path, capsys):
    assert run(tmp_path, "germ", "--d", "3", "--k", "2") == 0
    doc = json.loads((tmp_path / "germ.json").read_text())
    assert doc["k"] == 2 and len(doc["angles"]) == 3
    out = capsys.readouterr().out
    assert json.loads(out.splitlines()[0]) == doc


def test_atlas_schema_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["suite", "atlas", "--out", str(a), "--seed", "3"]) == 0
    assert main(["suite", "atlas", "--out", str(b), "--seed", "3"]) == 0
    files = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
    assert files
    for f in files:
        assert digest(a / f) == digest(b / f)
    arg = next(a.rglob("argument.csv"))
    raw = arg.read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.reader(raw.decode().splitlines()))
    assert rows[0] == ["s", "t", "h"]
    vals = np.array(rows[1:], dtype=float)
    for h in (0, 1):
        sel = vals[:, 2] == h
        dev = np.abs((vals[sel, 0] + vals[sel, 1] - math.pi * h + math.pi) % (2 * math.pi) - math.pi)
        assert sel.any() and dev.max() < 0.3 + 1e-12
    mod = next(a.rglob("modulus.csv"))
    assert mod.read_text().splitlines()[0] == "r1,r2"


def test_seed_changes_output(tmp_path):
    assert run(tmp_path / "a", "plot", "--kind", "modulus", "--seed", "1") == 0
    assert run(tmp_path / "b", "plot", "--kind", "modulus", "--seed", "2") == 0
    a = next((tmp_path / "a").rglob("modulus.csv"))
    b = next((tmp_path / "b").rglob("modulus.csv"))
    assert digest(a) != digest(b)


def test_plot_orbit_and_directions(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema_version": 1, "orbit": {"n_max": 20000}}))
    assert main(["plot", "--kind", "orbit", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    head = next(tmp_path.rglob("orbit.csv")).read_text().splitlines()[0]
    assert head == "n,re_z1,im_z1,re_z2,im_z2,abs_u,arg_u,re_U,im_U"
    assert main(["plot", "--kind", "directions", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = next(tmp_path.rglob("directions.csv")).read_text().splitlines()
    assert lines[0] == "n,arg_z2,argsum_deviation"
    assert float(lines[-1].split(",")[2]) < 1e-2


def test_orbit_command(tmp_path, capsys):
    assert run(tmp_path, "orbit", "--points", "0.05,0.05;0,0.05;0.5,0.5", "--n-max", "20000") == 0
    out = capsys.readouterr().out.split()
    assert out == ["Basin(0)", "SiegelHyperplane(1)", "Escaped"]
    verdicts = json.loads((tmp_path / "verdicts.json").read_text())
    assert verdicts[0]["first_entry"] is not None
    assert (tmp_path / "orbit_0.csv").exists()


def test_orbit_bad_points(tmp_path):
    assert run(tmp_path, "orbit", "--points", "0.05") == 2
    assert run(tmp_path, "orbit", "--points", "abc,def") == 2


def test_fatou_command(tmp_path, capsys):
    pts = tmp_path / "pts.json"
    pts.write_text(json.dumps([[[0.01, 0.0], [0.01, 0.0]], [[0.012, 0.001], [0.01, -0.001]]]))
    assert run(tmp_path, "fatou", "--points", str(pts)) == 0
    with open(tmp_path / "fatou.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert all(float(r["abel_residual"]) < 1e-8 for r in rows)
    assert all(float(r["tau_residual"]) < 1e-7 for r in rows)


def test_fatou_outside_basin_fails(tmp_path):
    assert run(tmp_path, "fatou", "--points", "0,0.05") == 1


def test_eliminate_command(tmp_path, capsys):
    assert run(tmp_path, "eliminate", "--degree", "10") == 0
    text = (tmp_path / "report.txt").read_text()
    assert "max eliminated" in text
    doc = json.loads((tmp_path / "conjugation.json").read_text())
    assert doc["residual"] < 1e-9


def test_eliminate_nicer_tail(tmp_path, perturbed33):
    g = tmp_path / "g.json"
    g.write_text(perturbed33.to_json())
    assert run(tmp_path, "eliminate", "--germ", str(g), "--preset", "nicer-tail", "--degree", "14") == 0
    assert "survivors" not in (tmp_path / "report.txt").read_text()


def test_cycle_command(tmp_path, capsys):
    assert run(tmp_path, "cycle") == 0
    rows = (tmp_path / "permutation.csv").read_text().splitlines()
    assert rows == ["h,image_h,success", "0,1,1.0", "1,0,1.0"]
    g = tmp_path / "g.json"
    assert run(tmp_path, "germ", "--k", "2") == 0
    g.write_text((tmp_path / "germ.json").read_text())
    assert run(tmp_path, "cycle", "--germ", str(g), "--p", "3") == 2


def test_brjuno_command(tmp_path, capsys):
    assert run(tmp_path, "brjuno", "--set", "level1", "--cap", "256") == 0
    rows = (tmp_path / "brjuno.csv").read_text().splitlines()
    assert rows[0] == "m,omega,partial_sum,increment" and len(rows) == 9
    assert run(tmp_path, "brjuno", "--set", "weird") == 2


def test_suite_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "suite", "asymptotics") == 0
    assert "asymptotics: PASS" in capsys.readouterr().out
    # the decay check fails for the default multipliers; the suite reports it
    assert run(tmp_path, "suite", "brjuno") == 1
    out = capsys.readouterr().out
    assert "brjuno: FAIL" in out and "[ok]" in out


def test_suite_k2_asymptotics(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema_version": 1, "germ": {"d": 2, "k": 2}}))
    assert main(["suite", "asymptotics", "--config", str(cfg), "--out", str(tmp_path)]) == 0


def test_console_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "oneres.cli", "germ", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert json.loads(r.stdout.splitlines()[0])["d"] == 2
