"""Run configuration: YAML text validated against a JSON schema, then cross-field checks."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np
import yaml

from ..disorder import SingleSite, SiteDistribution, derive_seed, sup_bound
from ..errors import ConfigError
from ..experiments.ensemble import EnsembleSpec
from ..geometry import BoxSpec
from ..magnetic import MagneticField
from ..testfun import LaurentPoly, exp_decay, from_laurent, resolvent_power

_num = {"type": "number"}
_int = {"type": "integer"}
_pos_int = {"type": "integer", "minimum": 1}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["d", "L", "ssd", "site", "f"],
    "properties": {
        "scenario": {"type": "string"},
        "d": {"type": "integer", "minimum": 1, "maximum": 3},
        "q": _pos_int,
        "L": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
        "bc": {"enum": ["dirichlet", "neumann"]},
        "field": {"type": ["array", "null"], "items": {"type": "array", "items": _num}},
        "ssd": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {"kind": {"enum": ["uniform", "two-point", "point-mass"]},
                           "a": _num, "b": _num, "prob": {"type": "number", "minimum": 0, "maximum": 1},
                           "c": _num},
        },
        "site": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {"kind": {"enum": ["indicator", "zero"]}, "height": _num},
        },
        "f": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {"kind": {"enum": ["resolvent-power", "laurent", "exp-decay"]},
                           "E": _num, "m": _int, "coeffs": {"type": "array", "items": _num, "minItems": 1},
                           "rate": {"type": "number", "exclusiveMinimum": 0}},
        },
        "samples": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "threads": {"type": "integer", "minimum": 0},
        "bootstrap": {"type": "integer", "minimum": 10},
        "chunk": _pos_int,
        "plan": {
            "type": "object", "additionalProperties": False,
            "properties": {"L": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 2},
                           "samples": {"type": "integer", "minimum": 2},
                           "eps": _num, "delta": _num, "gamma": _num, "alpha": _num,
                           "R": {"type": "number", "exclusiveMinimum": 0}},
        },
        "formula": {
            "type": "object", "additionalProperties": False,
            "properties": {"L_p": {"type": "integer", "minimum": 4}, "N_out": {"type": "integer", "minimum": 2},
                           "N_in": _pos_int, "Q": _int, "replicas": {"type": "integer", "minimum": 2}},
        },
        "decay": {
            "type": "object", "additionalProperties": False,
            "properties": {"L": {"type": "integer", "minimum": 4}, "ells": {"type": "array", "items": _num, "minItems": 2},
                           "inner_L": {"type": ["integer", "null"]}, "sample": {"type": "integer", "minimum": 0},
                           "distances": {"type": "array", "items": _num, "minItems": 2}},
        },
        "out": {"type": "string"},
    },
}

DEFAULTS = {
    "scenario": "custom",
    "q": 1,
    "bc": "dirichlet",
    "field": None,  # zero field of dimension d
    "samples": 2000,
    "seed": 20240611,
    "threads": 1,
    "bootstrap": 1000,
    "chunk": 250,
    "plan": {"L": [81, 256, 625], "samples": 1000, "eps": 0.75, "delta": 0.25, "gamma": 0.5, "alpha": 0.5, "R": 1.0},
    "formula": {"L_p": 64, "N_out": 400, "N_in": 32, "Q": 8, "replicas": 2},
    "decay": {"L": 128, "ells": [2, 4, 8, 16], "inner_L": None, "sample": 0,
              "distances": [2, 4, 6, 8, 10, 12, 14, 16, 18, 20]},
    "out": "results",
}

# keys that change numbers in the outputs; everything else is orchestration
_PHYSICS = ("d", "q", "L", "bc", "field", "ssd", "site", "f", "samples", "seed", "bootstrap",
            "plan", "formula", "decay")


@dataclass
class RunConfig:
    values: dict
    provenance: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def d(self) -> int:
        return self.values["d"]

    def field_(self) -> MagneticField:
        B = self.values["field"]
        return MagneticField.zero(self.d) if B is None else MagneticField(np.array(B, dtype=float))

    def dist(self) -> SiteDistribution:
        s = self.values["ssd"]
        if s["kind"] == "uniform":
            return SiteDistribution.uniform(s.get("a", 0.0), s.get("b", 1.0))
        if s["kind"] == "two-point":
            return SiteDistribution.two_point(s["a"], s["b"], s.get("prob", 0.5))
        return SiteDistribution.point_mass(s["c"])

    def site(self) -> SingleSite:
        s = self.values["site"]
        if s["kind"] == "zero":
            return SingleSite.zero(self.d, self.values["q"])
        return SingleSite.indicator(self.d, self.values["q"], s.get("height", 1.0))

    def test_function(self):
        f = self.values["f"]
        if f["kind"] == "resolvent-power":
            return resolvent_power(f["E"], f["m"])
        if f["kind"] == "laurent":
            return from_laurent(LaurentPoly(f["E"], f["m"], tuple(f["coeffs"])))
        return exp_decay(f.get("rate", 1.0))

    def ensemble_seed(self, L: int) -> int:
        return derive_seed(self.values["seed"], L)

    def spec(self, L: int, bc: str | None = None, samples: int | None = None) -> EnsembleSpec:
        v = self.values
        return EnsembleSpec(BoxSpec(self.d, L, v["q"], bc or v["bc"]), self.field_(), self.dist(), self.site(),
                            self.test_function(), samples or v["samples"], self.ensemble_seed(L))

    def physics(self) -> dict:
        return {k: self.values[k] for k in _PHYSICS}

    def hash(self) -> str:
        return canonical_hash(self.physics())

    def to_manifest(self) -> dict:
        return {"values": self.values, "provenance": self.provenance}


def canonical_hash(obj) -> str:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _path(err) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def _merge_defaults(raw: dict) -> tuple:
    values = copy.deepcopy(raw)
    prov = {}
    for key, default in DEFAULTS.items():
        if isinstance(default, dict):
            sub = values.setdefault(key, {})
            for k, dv in default.items():
                if k in sub:
                    prov[f"{key}.{k}"] = "user"
                else:
                    sub[k] = copy.deepcopy(dv)
                    prov[f"{key}.{k}"] = "default"
        elif key in values:
            prov[key] = "user"
        else:
            values[key] = copy.deepcopy(default)
            prov[key] = "default"
    for key in raw:
        if not isinstance(DEFAULTS.get(key), dict):
            prov[key] = "user"
    return values, prov


def _semantic(v: dict) -> list:
    errs = []
    d = v["d"]
    if v["field"] is not None:
        B = np.array(v["field"], dtype=float)
        if B.shape != (d, d):
            errs.append(f"field: expected a {d}x{d} matrix, got shape {list(B.shape)}")
        elif np.any(B != -B.T):
            errs.append("field: matrix must be exactly skew-symmetric")
    ssd = v["ssd"]
    need = {"uniform": (), "two-point": ("a", "b"), "point-mass": ("c",)}[ssd["kind"]]
    errs += [f"ssd/{k}: required for kind {ssd['kind']}" for k in need if k not in ssd]
    if ssd["kind"] == "uniform" and ssd.get("a", 0.0) > ssd.get("b", 1.0):
        errs.append("ssd: need a <= b")
    f = v["f"]
    if f["kind"] in ("resolvent-power", "laurent"):
        errs += [f"f/{k}: required for kind {f['kind']}" for k in ("E", "m") if k not in f]
        if f["kind"] == "laurent" and "coeffs" not in f:
            errs.append("f/coeffs: required for kind laurent")
    plan = v["plan"]
    if abs(plan["eps"] + plan["delta"] - 1.0) > 1e-12 or not plan["eps"] > plan["delta"] > 0:
        errs.append(f"plan: need eps > delta > 0 and eps + delta = 1 (got {plan['eps']}, {plan['delta']})")
    form = v["formula"]
    if form["Q"] < 2:
        errs.append(f"formula/Q: Gauss-Legendre needs Q >= 2 (got {form['Q']})")
    if f["kind"] in ("resolvent-power", "laurent") and "E" in f and not errs:
        try:
            vb = sup_bound(RunConfig(v).dist(), RunConfig(v).site())
        except ValueError as exc:
            errs.append(f"ssd: {exc}")
        else:
            if not f["E"] < -vb:
                errs.append(f"f/E: E must be < {-vb:g} (got {f['E']:g})")
    return errs


def parse_config(text: str) -> RunConfig:
    """Validated RunConfig, or ConfigError carrying every violation found."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ConfigError([f"syntax error{where}: {getattr(exc, 'problem', exc)}"]) from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: configuration must be a mapping"])
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errs = [f"{_path(e)}: {e.message}" for e in sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))]
    if errs:
        raise ConfigError(errs)
    values, prov = _merge_defaults(raw)
    errs = _semantic(values)
    if errs:
        raise ConfigError(errs)
    return RunConfig(values, prov)


def load_config(path=None) -> RunConfig:
    if path is None:
        text = resources.files("idsclt").joinpath("data/reference_1d.yaml").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return parse_config(text)


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Command-line or environment overrides; each one is tagged as user-provided."""
    values = copy.deepcopy(cfg.values)
    prov = dict(cfg.provenance)
    for key, val in overrides.items():
        if val is None:
            continue
        values[key] = val
        prov[key] = "user"
    errs = [f"{_path(e)}: {e.message}" for e in jsonschema.Draft202012Validator(SCHEMA).iter_errors(values)]
    errs += _semantic(values) if not errs else []
    if errs:
        raise ConfigError(errs)
    return RunConfig(values, prov)
