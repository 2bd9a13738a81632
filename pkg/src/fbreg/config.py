"""Experiment configuration: strict key = value sections, lossless round trip.

Unknown sections or keys are rejected with the offending line number and a
stable error code (no silent typos).  ``serialize`` emits the canonical form;
files written by it re-parse and re-serialize byte-identically, which is what
the provenance hash is computed over.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .expr import Expression, ExprError

SCENARIOS = (
    "solve-elliptic",
    "solve-parabolic",
    "fit-exponent",
    "blowup",
    "verify-barrier",
    "gamma",
    "symbol",
    "harnack",
    "regularity",
)


class ConfigError(ValueError):
    def __init__(self, message, code="E_CONFIG", line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"[{code}] {prefix}{message}")
        self.code = code
        self.line = line


def _parse_bool(s):
    if s in ("true", "True", "1"):
        return True
    if s in ("false", "False", "0"):
        return False
    raise ValueError(s)


def _parse_floats(s):
    return tuple(float(p) for p in s.split(",") if p.strip() != "")


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if isinstance(value, tuple):
        return ",".join(format(v, ".17g") for v in value)
    return str(value)


# schema: section -> key -> (parser, default)
SCHEMA = {
    "main": {
        "scenario": (str, None),
        "seed": (int, 0),
        "out_prefix": (str, "run"),
    },
    "kernel": {
        "s": (float, 0.5),
        "dim": (int, 1),
        "density": (str, "isotropic"),
        "lambda": (float, 0.0),   # 0 = derive from the sampled density
        "Lambda": (float, 0.0),
        "drift": (_parse_floats, ()),
    },
    "grid": {
        "extent": (float, 2.0),
        "nodes": (int, 129),
        "horizon": (float, 0.0),  # 0 = elliptic
        "steps": (int, 0),
    },
    "obstacle": {
        "expr": (str, "pos(1 - x^2)^2"),
        "growth": (float, 0.0),
        "scale": (float, 2.0),
    },
    "run": {
        "tol": (float, 1e-8),
        "gap_tol": (float, 1e-6),
        "r_min": (float, 0.0),    # 0 = default ladder
        "r_max": (float, 0.0),
        "max_points": (int, 40),
        "speeds": (_parse_floats, (0.0, 0.5, 1.0, 2.0)),
        "directions": (_parse_floats, (0.0,)),  # angles (2D) / signs (1D)
        "magnitude": (float, 1.0),
        "blowup_point": (_parse_floats, ()),
        "blowup_radii": (_parse_floats, (0.4, 0.28, 0.2)),
        "norm_mode": (str, "gradient"),
        "eps": (float, 0.01),
        "window": (_parse_floats, ()),
    },
    "barrier": {
        "kind": (str, "cone-super"),
        "theta": (float, 0.2),
        "eta": (float, 0.5),
        "omega": (float, 1.0),
        "theta0": (float, 1.0471975511965976),
        "gamma": (float, 0.25),
        "eps": (float, 0.15),
        "amplitude": (float, 4.0),
        "speed": (float, 1.0),
        "levels": (int, 2),
        "h0": (float, 0.05),
    },
    "harnack": {
        "opening": (float, 0.7853981633974483),
        "speed": (float, 0.0),
        "n_radii": (int, 4),
    },
}

_CODE_BY_KEY = {
    ("kernel", "drift"): "E_DRIFT_S",
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    source: str = ""

    def __getitem__(self, pair):
        section, key = pair
        return self.values[section][key]

    @property
    def scenario(self):
        return self.values["main"]["scenario"]

    def hash(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()[:16]


def parse_config(text: str) -> ExperimentConfig:
    values = {sec: dict((k, d) for k, (_, d) in keys.items()) for sec, keys in SCHEMA.items()}
    section = "main"
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(
                    f"unknown section [{section}]", code="E_UNKNOWN_SECTION", line=lineno
                )
            continue
        if "=" not in line:
            raise ConfigError("expected key = value", code="E_SYNTAX", line=lineno)
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in SCHEMA[section]:
            raise ConfigError(
                f"unknown key {key!r} in section [{section}]",
                code="E_UNKNOWN_KEY",
                line=lineno,
            )
        if (section, key) in seen:
            raise ConfigError(
                f"duplicate key {key!r}", code="E_DUPLICATE", line=lineno
            )
        seen.add((section, key))
        parser, _ = SCHEMA[section][key]
        try:
            values[section][key] = parser(val)
        except (ValueError, TypeError) as exc:
            raise ConfigError(
                f"cannot parse {key} = {val!r}: {exc}", code="E_TYPE", line=lineno
            ) from None

    cfg = ExperimentConfig(values=values, source=text)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    scen = cfg.values["main"]["scenario"]
    if scen is None:
        raise ConfigError("scenario is required", code="E_MISSING")
    if scen not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scen!r}", code="E_SCENARIO")
    s = cfg.values["kernel"]["s"]
    if not 0.0 < s < 1.0:
        raise ConfigError(f"kernel order s = {s} outside (0, 1)", code="E_VALUE")
    drift = cfg.values["kernel"]["drift"]
    if drift and any(b != 0.0 for b in drift) and abs(s - 0.5) > 1e-12:
        raise ConfigError(
            f"drift = {drift} requires s = 1/2 (got s = {s})", code="E_DRIFT_S"
        )
    dim = cfg.values["kernel"]["dim"]
    if dim not in (1, 2):
        raise ConfigError("dim must be 1 or 2 at desk scale", code="E_VALUE")
    if drift and len(drift) not in (0, dim):
        raise ConfigError("drift length must match dim", code="E_VALUE")
    try:
        Expression(cfg.values["obstacle"]["expr"])
    except ExprError as exc:
        raise ConfigError(f"obstacle expression: {exc}", code="E_EXPR") from None
    if scen in ("solve-parabolic", "fit-exponent", "harnack", "regularity", "blowup"):
        if cfg.values["grid"]["horizon"] <= 0 or cfg.values["grid"]["steps"] < 1:
            raise ConfigError(
                f"scenario {scen} needs horizon > 0 and steps >= 1", code="E_VALUE"
            )


def serialize(cfg: ExperimentConfig) -> str:
    lines = []
    for section in SCHEMA:
        keys = [k for k in SCHEMA[section] if cfg.values[section][k] is not None]
        if section != "main":
            lines.append("")
            lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_fmt(cfg.values[section][key])}")
    return "\n".join(lines) + "\n"
