"""Run configuration schemas, loading, manifests and atomic output."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import os
import tempfile
from importlib import resources
from pathlib import Path

import jsonschema

ENV_PREFIX = "AQCDYN_"
MODES = ("codes", "graph", "rates", "suppress", "correct", "stability")


class ConfigError(ValueError):
    """Schema or semantic violation in a run configuration."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_code = {
    "oneOf": [
        {"type": "string"},
        _obj({"name": {"type": "string"}, "n": _posint, "k": {"type": "integer", "minimum": 0},
              "generators": {"type": "array", "items": {"type": "string"}},
              "distance": _posint}, ("name", "n", "k", "generators")),
    ]
}
_model = {"oneOf": [{"type": "string", "pattern": "^[XYZxyz]+$"},
                    {"type": "array", "items": {"type": "string"}, "minItems": 1}]}
_ohmic = _obj({"kind": {"const": "ohmic"}, "E_R": _nonneg, "gamma": _pos, "T": _pos,
               "K_max": {"type": ["integer", "null"], "minimum": 1}}, ("E_R", "gamma", "T"))
_classical = _obj({"kind": {"const": "classical"}, "A": _num, "gamma": _pos}, ("kind", "gamma"))
_spectral = _obj({"E_R": _nonneg, "gamma": _pos}, ("E_R", "gamma"))
_reservoir = _obj({"E_R": _nonneg, "gamma": _pos, "T": _pos}, ("E_R", "gamma", "T"))
_numlist = {"type": "array", "items": _num, "minItems": 1}
_poslist = {"type": "array", "items": _pos, "minItems": 1}

_common = {
    "mode": {"enum": list(MODES)},
    "description": {"type": "string"},
    "seed": {"type": "integer", "minimum": 0},
    "threads": _posint,
    "format": {"enum": ["csv", "csv+svg"]},
}

SCHEMAS = {
    "codes": _obj({**_common, "code": _code, "error_model": _model, "max_weight": _posint}, ("mode", "code")),
    "graph": _obj({**_common, "code": _code, "error_model": _model, "max_weight": _posint,
                   "graph_format": {"enum": ["dot", "json"]}}, ("mode", "code")),
    "rates": _obj({**_common, "bath": _ohmic, "alphas": _poslist, "w": _posint,
                   "t_max": _pos, "points": {"type": "integer", "minimum": 2}},
                  ("mode", "bath", "alphas", "t_max")),
    "suppress": _obj({**_common, "bath": {"oneOf": [_ohmic, _classical]},
                      "scheme": {"enum": ["egp", "dd", "none"]}, "alphas": _poslist, "w": _posint,
                      "n_errors": _posint, "dd_period": _pos, "horizon": _pos, "dt": _pos,
                      "rate_points": {"type": "integer", "minimum": 2},
                      "P0": {"type": "number", "minimum": 0, "maximum": 1}, "clamp": {"type": "boolean"}},
                     ("mode", "bath", "scheme", "horizon")),
    "correct": _obj({**_common, "code": _code, "error_model": _model, "max_weight": _posint,
                     "bath": _ohmic, "reservoir": _reservoir,
                     "alpha_over_T": _poslist, "alphas": _poslist, "eps_bar": _num,
                     "rate_mode": {"enum": ["second_markov", "time_dependent"]},
                     "horizon": _pos, "samples": {"type": "integer", "minimum": 2}, "dt": _pos,
                     "method": {"enum": ["rk4", "expm"]}, "per_syndrome": {"type": "boolean"},
                     "clamp": {"type": "boolean"}, "conservation": {"type": "boolean"}},
                    ("mode", "code", "bath", "horizon")),
    "stability": _obj({**_common,
                       "code": _obj({"n": _posint, "k": {"type": "integer", "minimum": 0}, "d": _posint,
                                     "level": _posint, "kinds": _posint,
                                     "n_c_convention": {"enum": ["paper", "formula"]}}),
                       "bath": _spectral, "scalings": {"type": "array", "items": {"enum": ["log", "sqrt", "linear"]},
                                                       "minItems": 1},
                       "alphas": _poslist, "temperatures": _poslist,
                       "n_l": _obj({"min": _posint, "max": _posint, "points": {"type": "integer", "minimum": 2}},
                                   ("min", "max", "points")),
                       "crossover": _obj({"alpha_min": _pos, "alpha_max": _pos,
                                          "points": {"type": "integer", "minimum": 2},
                                          "n_l_min": _posint, "n_l_max": _posint})},
                      ("mode", "bath", "scalings", "alphas", "temperatures", "n_l")),
}


def validate_schema(cfg) -> list[str]:
    """Return a list of schema violations (empty if valid)."""
    if not isinstance(cfg, dict):
        return ["configuration must be a JSON object"]
    mode = cfg.get("mode")
    if mode not in SCHEMAS:
        return [f"'mode' must be one of {', '.join(MODES)} (got {mode!r})"]
    v = jsonschema.Draft202012Validator(SCHEMAS[mode])
    errs = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    return [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errs]


def shipped_configs() -> list[str]:
    root = resources.files("aqcdyn") / "data"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config_path(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.name.endswith(".json") else p.name + ".json"
    cand = resources.files("aqcdyn") / "data" / name
    if cand.is_file():
        return Path(str(cand))
    raise FileNotFoundError(f"config {path!r} not found (shipped: {', '.join(shipped_configs())})")


def load_config(path: str) -> dict:
    p = resolve_config_path(path)
    text = p.read_text(encoding="utf-8")
    if not text.strip():
        raise ConfigError("configuration file is empty")
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    errs = validate_schema(cfg)
    if errs:
        raise ConfigError("; ".join(errs))
    return cfg


def env_override(name: str, value, cast=str):
    """Command-line value if given, else ``AQCDYN_<NAME>`` from the environment, else None."""
    if value is not None:
        return value
    raw = os.environ.get(ENV_PREFIX + name.upper())
    return cast(raw) if raw not in (None, "") else None


def content_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def atomic_write(path: Path, data: str | bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(x) for x in r])
    return buf.getvalue()


def manifest(cfg: dict, files: list[str], version: str) -> dict:
    return {
        "tool": "aqcdyn",
        "version": version,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "content_hash": content_hash(cfg),
        "config": cfg,
        "files": sorted(files),
    }
