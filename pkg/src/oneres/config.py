"""Experiment configuration: one JSON file with a versioned schema."""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .basins import BasinParams
from .errors import ConfigInvalid, OneresError
from .germs import GermSpec, germ_from_json

SCHEMA_VERSION = 1

DEFAULT_TOLERANCES = {
    "asymptotics": 0.02,
    "ratio_low": 0.5,
    "ratio_high": 2.0,
    "abel": 1e-6,
    "fatou_depth": 1e-12,
    "fatou_depth_perturbed": 1e-8,
    "tau": 1e-6,
    "cylinder": 1e-6,
    "eliminated": 1e-10,
    "series_residual": 1e-9,
    "pointwise": 1e-8,
    "root": 1e-12,
    "sigma_closed_form": 1e-10,
    "brjuno_match": 1e-12,
    "direction": 1e-2,
    "arg_gap": 0.1,
}

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "germ": {"d": 2, "k": 1},
    "basin": {"theta": 0.3, "beta": 0.4, "R": None},
    "orbit": {"n_max": 100_000, "ball": 0.2, "starts_per_sector": 20},
    "samples": {"invariance": 10_000, "fatou": 1000, "classify": 10_000, "atlas": 2000},
    "elimination": {"degree": 12},
    "cycle": {"k": 2, "p": 2, "r": 1e-2, "samples": 1000},
    "brjuno": {"cap": 256},
    "tolerances": DEFAULT_TOLERANCES,
    "out": "out",
    "seed": 0,
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "germ":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def out(self) -> Path:
        p = Path(self.raw["out"])
        return p if p.is_absolute() else self.base_dir / p

    @property
    def tol(self) -> dict:
        return self.raw["tolerances"]

    def section(self, name: str) -> dict:
        return self.raw[name]

    def germ(self) -> GermSpec:
        g = self.raw["germ"]
        if "file" in g:
            path = Path(g["file"])
            path = path if path.is_absolute() else self.base_dir / path
            try:
                g = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigInvalid(f"cannot read germ file {path}: {e}") from e
        try:
            return germ_from_json(g)
        except OneresError as e:
            raise ConfigInvalid(f"invalid germ: {e}") from e
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigInvalid(f"malformed germ: {e!r}") from e

    def basin(self, germ: GermSpec, h: int = 0, R: float | None = None) -> BasinParams:
        b = self.raw["basin"]
        R = R if R is not None else (b.get("R") or 1.0)
        try:
            return BasinParams(germ.d, germ.k, h, float(R), float(b["theta"]), float(b["beta"]))
        except OneresError as e:
            raise ConfigInvalid(str(e)) from e

    def to_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)

    def validate(self) -> "ExperimentConfig":
        r = self.raw
        if r.get("schema_version") != SCHEMA_VERSION:
            raise ConfigInvalid(f"schema_version must be {SCHEMA_VERSION}")
        unknown = set(r) - set(DEFAULTS)
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        for name, val in r["tolerances"].items():
            if name not in DEFAULT_TOLERANCES:
                raise ConfigInvalid(f"unknown tolerance {name!r}")
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ConfigInvalid(f"tolerance {name} must be a positive number")
        if not isinstance(r["seed"], int) or r["seed"] < 0:
            raise ConfigInvalid("seed must be a non-negative integer")
        for sec in ("orbit", "samples", "elimination", "cycle", "brjuno"):
            for key, val in r[sec].items():
                if not isinstance(val, (int, float)) or val <= 0:
                    raise ConfigInvalid(f"{sec}.{key} must be positive")
        g = self.germ()
        b = r["basin"]
        if b.get("R") is not None and not (isinstance(b["R"], (int, float)) and b["R"] > 0):
            raise ConfigInvalid("basin.R must be positive")
        self.basin(g)
        return self


def load_config(path=None, seed: int | None = None, out=None, tols: dict | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    raw = copy.deepcopy(DEFAULTS)
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigInvalid(f"cannot read config {path}: {e}") from e
        if not isinstance(doc, dict):
            raise ConfigInvalid("config must be a JSON object")
        raw = _merge(raw, doc)
        base_dir = path.parent.resolve()
    if overrides:
        raw = _merge(raw, overrides)
    if seed is not None:
        raw["seed"] = seed
    if out is not None:
        raw["out"] = str(Path(out).resolve())
    for name, val in (tols or {}).items():
        raw["tolerances"][name] = val
    return ExperimentConfig(raw, base_dir).validate()


def parse_tol(items) -> dict:
    out = {}
    for item in items or []:
        name, sep, val = item.partition("=")
        if not sep:
            raise ConfigInvalid(f"--tol expects NAME=VAL, got {item!r}")
        try:
            out[name.strip()] = float(val)
        except ValueError as e:
            raise ConfigInvalid(f"--tol value for {name} is not a number") from e
    return out
