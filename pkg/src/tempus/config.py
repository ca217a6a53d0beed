"""Scenario configuration: INI sections (or the same structure in JSON).

Grammar::

    [scenario]
    name = fig1
    kind = fig1          ; fig1 | fig2 | smith | arrival | lyapunov

    [grid]
    e_min = 0.6
    e_max = 2.2
    panels = 256
    nodes = 12

and so on for [packet], [potential], [time], [positions], [gauge],
[output] and [tolerances]. ``base = <builtin>`` under [scenario] starts from
a builtin scenario and overrides only the keys given. Unknown sections or keys are errors; every
error names the section, key and, for INI input, the line.
"""
from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

KINDS = ("fig1", "fig2", "smith", "arrival", "lyapunov")
GAUGE_KINDS = ("unity", "linear-phase", "quadratic-phase", "first-arrival", "file")
REQUIRED = object()


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


# section -> key -> (type, default, predicate, description of the range)
SCHEMA = {
    "scenario": {
        "name": (str, REQUIRED, None, ""),
        "kind": (str, REQUIRED, lambda v: v in KINDS, f"one of {', '.join(KINDS)}"),
    },
    "grid": {
        "e_min": (float, 0.0, _nonneg, ">= 0"),
        "e_max": (float, REQUIRED, _positive, "> 0"),
        "panels": (int, 256, lambda v: 1 <= v <= 100_000, "in [1, 100000]"),
        "nodes": (int, 12, lambda v: 1 <= v <= 64, "in [1, 64]"),
    },
    "packet": {
        "k0": (float, REQUIRED, lambda v: v != 0 and math.isfinite(v), "nonzero"),
        "dk": (float, REQUIRED, _positive, "> 0"),
        "x0": (float, REQUIRED, _nonneg, ">= 0"),
        "beta": (float, 0.5, _nonneg, ">= 0"),
    },
    "potential": {
        "kind": (str, "free", lambda v: v in ("free", "delta"), "free or delta"),
        "g": (float, 0.0, _nonneg, ">= 0"),
        "a": (float, 0.0, _nonneg, ">= 0"),
    },
    "time": {
        "t_min": (float, REQUIRED, math.isfinite, "finite"),
        "t_max": (float, REQUIRED, math.isfinite, "finite"),
        "n_t": (int, REQUIRED, lambda v: 2 <= v <= 2_000_000, "in [2, 2000000]"),
    },
    "positions": {
        "times": (str, "0, 190", None, "comma-separated times"),
        "r_max": (float, 400.0, _positive, "> 0"),
        "n_r": (int, 4001, lambda v: 2 <= v <= 1_000_000, "in [2, 1000000]"),
    },
    "gauge": {
        "kind": (str, "unity", lambda v: v in GAUGE_KINDS, f"one of {', '.join(GAUGE_KINDS)}"),
        "param": (float, 0.0, math.isfinite, "finite"),
        "file": (str, "", None, ""),
    },
    "output": {
        "dir": (str, "tempus-out", None, ""),
    },
    "tolerances": {
        "center": (float, 2.0, _positive, "> 0"),
        "identity": (float, 1e-2, _positive, "> 0"),
        "interpolation": (float, 1e-4, _positive, "> 0"),
        "mass": (float, 1e-6, _positive, "> 0"),
        "moments": (float, 1e-5, _positive, "> 0"),
        "monotone": (float, 1e-10, _positive, "> 0"),
        "endpoints": (float, 1e-3, _positive, "> 0"),
        "accumulation": (float, 1e-10, _positive, "> 0"),
        "window_mass": (float, 0.999, lambda v: 0 < v <= 1, "in (0, 1]"),
    },
}

# sections a scenario kind needs in full (required keys enforced only there)
NEEDS = {
    "fig1": ("scenario", "grid", "packet", "potential", "positions"),
    "fig2": ("scenario", "grid", "packet", "potential", "time"),
    "smith": ("scenario", "grid", "packet", "potential"),
    "arrival": ("scenario", "grid", "packet", "time", "gauge"),
    "lyapunov": ("scenario", "grid", "packet", "time", "gauge"),
}


@dataclass
class ScenarioConfig:
    """Resolved configuration: every section filled with typed values."""

    values: dict
    source: str = "<builtin>"
    lines: dict = field(default_factory=dict)

    def __getitem__(self, section):
        return self.values[section]

    @property
    def name(self):
        return self.values["scenario"]["name"]

    @property
    def kind(self):
        return self.values["scenario"]["kind"]

    def snapshot_times(self):
        return parse_times(self.values["positions"]["times"])

    def to_ini(self):
        """Resolved configuration in the INI grammar, sections in schema order."""
        out = []
        for section, keys in SCHEMA.items():
            out.append(f"[{section}]")
            for key in keys:
                v = self.values[section][key]
                out.append(f"{key} = {v!r}" if isinstance(v, float) else f"{key} = {v}")
            out.append("")
        return "\n".join(out)


def parse_times(text):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"[positions] times: {exc}") from None


def _line_index(text):
    """(section, key) -> line number for an INI text."""
    index, section = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip().lower()
            index.setdefault((section, None), n)
            continue
        m = re.match(r"([^=:;#\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            index[(section, m.group(1).strip().lower())] = n
    return index


def _where(lines, section, key=None):
    n = lines.get((section, key))
    return f" (line {n})" if n else ""


def _read_raw(text, source):
    """Raw nested mapping from INI or JSON text."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        if not isinstance(raw, dict) or not all(isinstance(v, dict) for v in raw.values()):
            raise ConfigError(f"{source}: JSON config must map section names to objects")
        return {s.lower(): {k.lower(): v for k, v in d.items()} for s, d in raw.items()}, {}
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    raw = {s.lower(): dict(parser.items(s)) for s in parser.sections()}
    return raw, _line_index(text)


def _convert(typ, value):
    if typ is str:
        return str(value)
    if isinstance(value, bool):
        raise ValueError("booleans are not numbers")
    if typ is int:
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"{value!r} is not an integer")
        return int(str(value).strip()) if isinstance(value, str) else int(value)
    return float(value)


def resolve(raw, source="<config>", lines=None, base=None):
    """Validate a raw nested mapping (optionally over ``base`` defaults)."""
    lines = lines or {}
    errors = []
    merged = {}
    base = base or {}
    for section in raw:
        if section not in SCHEMA:
            errors.append(f"unknown section [{section}]{_where(lines, section)}")
    kind = raw.get("scenario", {}).get("kind", base.get("scenario", {}).get("kind"))
    needed = NEEDS.get(kind, ("scenario",))
    for section, keys in SCHEMA.items():
        given = dict(base.get(section, {}))
        given.update(raw.get(section, {}))
        for key in given:
            if key not in keys:
                errors.append(f"[{section}] unknown key '{key}'{_where(lines, section, key)}")
        out = {}
        for key, (typ, default, ok, desc) in keys.items():
            where = _where(lines, section, key)
            if key in given:
                try:
                    value = _convert(typ, given[key])
                except (TypeError, ValueError):
                    errors.append(f"[{section}] {key}: expected {typ.__name__}, got "
                                  f"{given[key]!r}{where}")
                    continue
                if ok is not None and not ok(value):
                    errors.append(f"[{section}] {key}: {value!r} out of range ({desc}){where}")
                    continue
                out[key] = value
            elif default is REQUIRED:
                if section in needed:
                    errors.append(f"[{section}] {key}: required field missing")
                out[key] = None
            else:
                out[key] = default
        merged[section] = out
    if not errors:
        errors.extend(_cross_checks(merged, lines, needed))
    if errors:
        raise ConfigError(f"{source}: invalid configuration\n  " + "\n  ".join(errors))
    return ScenarioConfig(merged, source, lines)


def _cross_checks(cfg, lines, needed):
    errs = []
    g = cfg["grid"]
    if g["e_max"] is not None and not g["e_max"] > g["e_min"]:
        errs.append(f"[grid] e_max: must exceed e_min{_where(lines, 'grid', 'e_max')}")
    p = cfg["potential"]
    if p["kind"] == "delta" and not p["a"] > 0:
        errs.append(f"[potential] a: delta barrier needs a > 0{_where(lines, 'potential', 'a')}")
    t = cfg["time"]
    if "time" in needed and not t["t_max"] > t["t_min"]:
        errs.append(f"[time] t_max: must exceed t_min{_where(lines, 'time', 't_max')}")
    ga = cfg["gauge"]
    if ga["kind"] == "file" and not ga["file"]:
        errs.append(f"[gauge] file: required when kind = file{_where(lines, 'gauge', 'kind')}")
    try:
        parse_times(cfg["positions"]["times"])
    except ConfigError as exc:
        errs.append(str(exc))
    if cfg["scenario"]["kind"] in ("fig2", "smith") and p["kind"] != "delta":
        errs.append(f"[potential] kind: scenario needs a delta barrier"
                    f"{_where(lines, 'potential', 'kind')}")
    return errs


FIG1_BASE = {
    "grid": {"e_min": 0.6, "e_max": 2.2, "panels": 256, "nodes": 12},
    "packet": {"k0": math.pi / 2, "dk": 0.045, "x0": 180.0, "beta": 0.5},
    "potential": {"kind": "delta", "g": 20.0, "a": 20.0},
    "time": {"t_min": 0.0, "t_max": 300.0, "n_t": 601},
}

BUILTINS = {
    "fig1": ("position densities before (t=0) and after (t=190) the collision",
             {**FIG1_BASE, "scenario": {"name": "fig1", "kind": "fig1"}}),
    "fig2": ("arrival densities at x=0 for the in, out and io asymptotes",
             {**FIG1_BASE, "scenario": {"name": "fig2", "kind": "fig2"}}),
    "smith": ("mean arrival shift against the Smith delay integral",
              {**FIG1_BASE, "scenario": {"name": "smith", "kind": "smith"}}),
    "arrival": ("free-packet arrival and clock densities with moment cross-checks",
                {**FIG1_BASE, "scenario": {"name": "arrival", "kind": "arrival"},
                 "potential": {"kind": "free"},
                 "time": {"t_min": -300.0, "t_max": 300.0, "n_t": 1201}}),
    "lyapunov": ("Lyapunov curve and Strauss-kernel expectation of a free packet",
                 {"scenario": {"name": "lyapunov", "kind": "lyapunov"},
                  "grid": {"e_min": 0.5, "e_max": 1.5, "panels": 64, "nodes": 12},
                  "packet": {"k0": math.sqrt(2.0), "dk": 0.05, "x0": 20.0, "beta": 0.5},
                  "time": {"t_min": -40.0, "t_max": 80.0, "n_t": 121}}),
}


def builtin(name):
    if name not in BUILTINS:
        raise ConfigError(f"unknown builtin scenario {name!r}; try one of {', '.join(BUILTINS)}")
    return resolve(BUILTINS[name][1], f"<builtin {name}>")


def load(path_or_name):
    """Builtin name, or a path to an INI/JSON file."""
    if path_or_name in BUILTINS and not Path(path_or_name).exists():
        return builtin(path_or_name)
    path = Path(path_or_name)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    raw, lines = _read_raw(text, str(path))
    if not raw:
        raise ConfigError(f"{path}: empty configuration; required fields: "
                          + ", ".join(f"[{s}] {k}" for s, ks in SCHEMA.items()
                                      for k, spec in ks.items() if spec[1] is REQUIRED))
    base = None
    name = raw.get("scenario", {}).get("base")
    if name is not None:
        raw["scenario"].pop("base")
        base = BUILTINS.get(name, (None, None))[1]
        if base is None:
            raise ConfigError(f"{path}: unknown base scenario {name!r}"
                              f"{_where(lines, 'scenario', 'base')}")
    return resolve(raw, str(path), lines, base)
