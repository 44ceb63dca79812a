"""INI-style run configuration with one central defaults table.

Every key has a type, a default and a range check; unknown sections or keys
are errors, and every error names the offending field as ``section.key``.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass

import numpy as np

from .problems import Problem

EXPERIMENTS = ("exact", "stability", "persistence", "alternative", "counterexample",
               "penalized-path")


class ConfigError(ValueError):
    def __init__(self, field: str, msg: str):
        super().__init__(f"{field}: {msg}" if field else msg)
        self.field = field


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


# section -> key -> (type, default, check, description)
DEFAULTS = {
    "grid": {
        "n_cells": ("int", 128, lambda v: v >= 8, "cells per side (>= 8)"),
        "extent": ("float", 2.0, _pos, "side length"),
        "center": ("pair", (0.0, 0.0), None, "domain center"),
        "origin_cell": ("bool", False, None, "put a cell center at the origin (n even)"),
    },
    "coefficients": {
        "kind": ("choice:scalar,constant,radial,radial_perturbation", "scalar", None, "coefficient family"),
        "value": ("float", 1.0, _pos, "scalar multiple of I"),
        "matrix": ("matrix", (1.0, 0.0, 1.0), None, "a11, a12, a22"),
        "profile": ("choice:constant,oscillation,dyadic,step", "oscillation", None, "radial profile"),
        "phase_speed": ("float", 1.0, lambda v: v >= 1, "s in cos(pi s log|log r|), >= 1"),
        "omega": ("float", 0.0, lambda v: v == 0 or 0 < v < 1 / math.e,
                  "junction radius, 0 = outermost admissible"),
        "delta": ("float", 0.0, _nonneg, "perturbation size"),
        "low": ("float", 2.0, _pos, "dyadic profile low value"),
        "high": ("float", 3.0, _pos, "dyadic profile high value"),
        "radius": ("float", 0.5, _pos, "step profile radius"),
        "inner": ("float", 2.0, _pos, "step profile inner value"),
        "outer": ("float", 3.0, _pos, "step profile outer value"),
        "mollify": ("float", 0.0, _nonneg, "mollifier radius, 0 = none"),
    },
    "boundary": {
        "kind": ("choice:halfspace,constant", "halfspace", None, "boundary datum"),
        "scale": ("float", 0.5, _nonneg, "half-space datum scale"),
        "beta": ("float", 0.3, None, "half-space offset"),
        "normal": ("pair", (0.0, 1.0), lambda v: np.hypot(*v) > 0, "half-space normal"),
        "offset": ("float", 0.0, _nonneg, "constant added to the datum"),
        "value": ("float", 0.0, _nonneg, "constant datum"),
    },
    "solver": {
        "tol": ("float", 1e-9, _pos, "complementarity residual tolerance"),
        "max_policies": ("int", 200, lambda v: v >= 1, "policy iteration cap"),
        "cross": ("choice:auto,central,directional", "auto", None, "mixed-derivative stencil"),
        "nested": ("bool", True, None, "coarse-to-fine initial policy"),
        "t_steps": ("int", 10, lambda v: v >= 1, "continuation steps"),
    },
    "analysis": {
        "eps": ("float", 0.05, lambda v: 0 < v < 0.125, "classification epsilon in (0, 1/8)"),
        "r0": ("float", 0.25, _pos, "largest tested radius"),
        "tau": ("float", 1.0, lambda v: 0 < v <= 1, "inner radius fraction"),
        "collar_cells": ("float", 4.0, _nonneg, "collar around reference free boundaries, in cells"),
        "window": ("float", 0.5, _pos, "comparison ball radius for rescalings"),
        "radii": ("floats", (), lambda v: all(x > 0 for x in v), "explicit radii; empty = automatic"),
        "probe_radius": ("float", 0.5, _pos, "probes are taken within this ball"),
        "n_probes": ("int", 4, lambda v: v >= 1, "interior probes per phase"),
        "slack": ("float", 0.10, _nonneg, "relative slack for monotone sweeps"),
    },
    "experiment": {
        "name": ("choice:," + ",".join(EXPERIMENTS), "", None, "experiment to run"),
        "eps_list": ("floats", (0.2, 0.1, 0.05, 0.025), lambda v: all(x > 0 for x in v),
                     "penalization widths"),
        "deltas": ("floats", (0.2, 0.1, 0.05), None, "perturbation sweep"),
        "beta_bracket": ("pair", (-0.1, 0.1), lambda v: v[0] < v[1], "bisection bracket for beta"),
        "margin": ("float", 2.0, lambda v: v >= 1, "distance ratio required for a matched profile"),
        "control_value": ("float", 2.5, _pos, "scalar of the constant-coefficient control"),
        "selection": ("choice:extrema,window", "extrema", None, "radius subsequence rule"),
        "window_tol": ("float", 0.1, _pos, "tolerance of the window rule"),
        "n_radii": ("int", 48, lambda v: v >= 4, "candidate radii for blowups"),
        "r_max": ("float", 0.9, _pos, "largest blowup radius"),
        "agreement": ("float", 0.2, _nonneg, "relative agreement with the closed-form offset"),
        "stability_radius": ("float", 1.0, _pos, "ball for symmetric differences"),
        "refine": ("bool", True, None, "also solve at 2n for an observed order"),
        "pin": ("bool", True, None, "pin the free boundary at the origin before blowups"),
    },
}


def _parse_value(field: str, kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError("not finite")
            return v
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        if kind in ("pair", "matrix", "floats"):
            parts = [p for p in raw.replace(";", ",").split(",") if p.strip()]
            vals = tuple(float(p) for p in parts)
            if not all(math.isfinite(v) for v in vals):
                raise ValueError("not finite")
            want = {"pair": 2, "matrix": 3}.get(kind)
            if want is not None and len(vals) != want:
                raise ValueError(f"expected {want} comma-separated numbers, got {len(vals)}")
            return vals
        if kind.startswith("choice:"):
            options = kind[len("choice:"):].split(",")
            if raw not in options:
                shown = [o for o in options if o] or options
                raise ValueError(f"expected one of {shown}, got {raw!r}")
            return raw
    except ValueError as exc:
        raise ConfigError(field, str(exc)) from None
    raise ConfigError(field, f"unsupported type {kind}")


def _format_value(kind: str, v) -> str:
    if kind == "bool":
        return "true" if v else "false"
    if kind == "float":
        return repr(float(v))
    if kind in ("pair", "matrix", "floats"):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration; ``values`` maps section -> key -> typed value."""

    values: dict

    def get(self, path: str):
        section, key = path.split(".")
        return self.values[section][key]

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def replace(self, **changes) -> "ExperimentConfig":
        """``replace(**{"grid.n_cells": 256})``; the result is re-validated."""
        vals = {s: dict(d) for s, d in self.values.items()}
        for path, v in changes.items():
            section, key = path.split(".")
            if section not in DEFAULTS or key not in DEFAULTS[section]:
                raise ConfigError(path, "unknown key")
            vals[section][key] = v
        return _validated(vals)

    def coefficient_descriptor(self) -> dict:
        c = self.values["coefficients"]
        a11, a12, a22 = c["matrix"]
        matrix = [[a11, a12], [a12, a22]]
        omega = c["omega"] or None
        kind = c["kind"]
        if kind == "scalar":
            d = {"kind": "scalar", "value": c["value"]}
        elif kind == "constant":
            d = {"kind": "constant", "matrix": matrix}
        elif kind == "radial":
            d = {"kind": "radial", "profile": c["profile"], "s": c["phase_speed"], "omega": omega,
                 "low": c["low"], "high": c["high"], "radius": c["radius"], "inner": c["inner"],
                 "outer": c["outer"], "value": c["value"]}
        else:
            d = {"kind": "radial_perturbation", "matrix": matrix, "delta": c["delta"],
                 "s": c["phase_speed"], "omega": omega}
        if c["mollify"] > 0:
            d["mollify"] = c["mollify"]
        return d

    def boundary_descriptor(self) -> dict:
        b = self.values["boundary"]
        if b["kind"] == "constant":
            return {"kind": "constant", "value": b["value"], "offset": b["offset"]}
        return {"kind": "halfspace", "scale": b["scale"], "beta": b["beta"],
                "normal": tuple(b["normal"]), "offset": b["offset"]}

    def problem(self) -> Problem:
        g = self.values["grid"]
        return Problem(n_cells=g["n_cells"], extent=g["extent"], center=tuple(g["center"]),
                       origin_cell=g["origin_cell"], coefficients=self.coefficient_descriptor(),
                       boundary=self.boundary_descriptor(), cross=self.values["solver"]["cross"])

    def as_dict(self) -> dict:
        return {s: {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}
                for s, d in self.values.items()}


def _validated(vals: dict) -> ExperimentConfig:
    for section, keys in DEFAULTS.items():
        for key, (kind, _, check, desc) in keys.items():
            v = vals[section][key]
            if check is not None and not check(v):
                raise ConfigError(f"{section}.{key}", f"value {v!r} out of range ({desc})")
    g = vals["grid"]
    if g["origin_cell"] and g["n_cells"] % 2:
        raise ConfigError("grid.n_cells", "must be even when grid.origin_cell is true")
    c = vals["coefficients"]
    if c["kind"] == "constant":
        a11, a12, a22 = c["matrix"]
        if not (a11 > 0 and a11 * a22 - a12 * a12 > 0):
            raise ConfigError("coefficients.matrix", "matrix is not positive definite")
    return ExperimentConfig({s: dict(d) for s, d in vals.items()})


def default_config() -> ExperimentConfig:
    return _validated({s: {k: entry[1] for k, entry in keys.items()} for s, keys in DEFAULTS.items()})


def parse_config(text: str) -> ExperimentConfig:
    """Parse INI text; missing keys take their defaults."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        where = f"line {line}" if line else "syntax"
        raise ConfigError("", f"malformed config ({where}): {exc.message if hasattr(exc, 'message') else exc}") from None
    vals = {s: {k: entry[1] for k, entry in keys.items()} for s, keys in DEFAULTS.items()}
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigError(section, "unknown section")
        for key, raw in cp.items(section):
            if key not in DEFAULTS[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            vals[section][key] = _parse_value(f"{section}.{key}", DEFAULTS[section][key][0], raw)
    return _validated(vals)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = []
    for section, keys in DEFAULTS.items():
        lines.append(f"[{section}]")
        for key, (kind, *_rest) in keys.items():
            lines.append(f"{key} = {_format_value(kind, cfg.values[section][key])}")
        lines.append("")
    return "\n".join(lines)


def require(cfg: ExperimentConfig, path: str):
    v = cfg.get(path)
    if v in ("", None, ()):
        raise ConfigError(path, "missing required field")
    return v


def defaults_table() -> list[tuple[str, str, str]]:
    """(field, default, description) rows for documentation."""
    return [(f"{s}.{k}", _format_value(entry[0], entry[1]), entry[3])
            for s, keys in DEFAULTS.items() for k, entry in keys.items()]
