"""Scenario files: TOML with fixed sections, defaults and line-anchored validation."""

from __future__ import annotations

import copy
import re
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import AnosovFamilyError, ValidationError
from .families import example23_metric, example24_metric, zeta_law
from .family import MetricTensor, NsdsFamily, Perturbation, TorusMap

COMMANDS = ("verify", "schedule", "manifold", "decay", "coincidence", "probe-expansivity")
_REQUIRED = object()

# section -> key -> (kind, default); "tables" marks arrays of tables
SCHEMA = {
    "": {"name": ("str", _REQUIRED), "seed": ("int", 0), "description": ("str", "")},
    "family": {
        "linear": ("intmatrix", [[2, 1], [1, 1]]),
        "epsilon": ("float", 0.0),
        "metric": ("str", "constant"),
        "metric_matrix": ("matrix", [[1.0, 0.0], [0.0, 1.0]]),
        "a": ("float", 0.9),
        "b": ("float", 0.9),
        "zeta_law": ("str", "constant"),
        "zeta_value": ("float", 0.5),
        "zeta_offset": ("float", 2.0),
        "zeta_base": ("float", 0.5),
        "zeta_ratio": ("float", 0.9),
        "perturbation": ("tables", []),
    },
    "family.perturbation": {
        "amplitude": ("float", 1.0),
        "frequency": ("intpair", [1, 0]),
        "target": ("int", 0),
        "phase": ("float", 0.0),
    },
    "run": {
        "window": ("int", 8),
        "grid": ("int", 128),
        "anchor": ("pair", [0.1, 0.2]),
        "horizon": ("int", 10),
        "c": ("float", 1.0),
        "lambda": ("float?", None),
        "depth": ("int", 30),
        "margin": ("float", 1e-6),
        "commands": ("strlist", list(COMMANDS)),
        "side": ("str", "u"),
    },
    "tolerances": {"fixed_point": ("float", 1e-10), "splitting_residual": ("float", 1e-6)},
    "params": {
        "gamma": ("float?", None),
        "lambda_tilde": ("float?", None),
        "zeta": ("float?", None),
        "safety": ("float", 1.25),
        "sigma_grid": ("int", 33),
    },
    "decay": {"horizon": ("int", 20), "epsilon": ("float?", None), "pair": ("tables", [])},
    "decay.pair": {"along": ("str?", "s"), "size": ("float", 0.001), "q": ("pair?", None)},
    "probe": {
        "samples": ("int", 8),
        "horizon": ("int", 40),
        "backward_horizon": ("int", 20),
        "separation": ("float", 0.01),
        "start": ("pair?", None),
    },
    "coincidence": {"horizon": ("int", 20)},
}

_HEADER = re.compile(r"^\s*(\[\[?)\s*([A-Za-z0-9_.\-\" ]+?)\s*\]\]?\s*(#.*)?$")
_KEY = re.compile(r"^\s*([A-Za-z0-9_\-\".]+)\s*=")


def key_lines(text: str) -> dict:
    """First line of every ``(section, key)`` and table header in a TOML text."""
    out = {}
    section = ""
    for no, line in enumerate(text.splitlines(), 1):
        m = _HEADER.match(line)
        if m:
            section = m.group(2).replace('"', "").strip()
            out.setdefault((section, None), no)
            continue
        m = _KEY.match(line)
        if m:
            parts = m.group(1).replace('"', "").split(".")
            sec = ".".join([s for s in [section, *parts[:-1]] if s])
            out.setdefault((sec, parts[-1]), no)
    return out


def _check(kind: str, value, where):
    def fail(msg):
        raise ValidationError(msg, *where)

    opt = kind.endswith("?")
    base = kind.rstrip("?")
    if value is None:
        if opt:
            return None
        fail("value required")
    if base == "str":
        if not isinstance(value, str):
            fail(f"expected a string, got {value!r}")
        return value
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            fail(f"expected an integer, got {value!r}")
        return value
    if base == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail(f"expected a number, got {value!r}")
        return float(value)
    if base in ("pair", "intpair"):
        ok = isinstance(value, list) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        )
        if base == "intpair":
            ok = ok and all(isinstance(v, int) for v in value)
        if not ok:
            fail(f"expected a list of two {'integers' if base == 'intpair' else 'numbers'}, got {value!r}")
        return [int(v) for v in value] if base == "intpair" else [float(v) for v in value]
    if base in ("matrix", "intmatrix"):
        rows = value if isinstance(value, list) and len(value) == 2 else None
        if rows is None or not all(isinstance(r, list) and len(r) == 2 for r in rows):
            fail(f"expected a 2x2 matrix, got {value!r}")
        for r in rows:
            for v in r:
                if isinstance(v, bool) or not isinstance(v, (int, float)) or (base == "intmatrix" and not isinstance(v, int)):
                    fail(f"bad matrix entry {v!r}")
        return [[(int(v) if base == "intmatrix" else float(v)) for v in r] for r in rows]
    if base == "strlist":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            fail(f"expected a list of strings, got {value!r}")
        return list(value)
    raise AssertionError(kind)


def _resolve_table(section: str, table: dict, lines: dict, path, index: int | None = None) -> dict:
    schema = SCHEMA[section]
    out = {}
    for key, value in table.items():
        if key not in schema:
            line = lines.get((section, key))
            raise ValidationError(f"unknown key {'.'.join(filter(None, [section, key]))!r}", line, path)
    for key, (kind, default) in schema.items():
        line = lines.get((section, key), lines.get((section, None)))
        if kind == "tables":
            items = table.get(key, [])
            sub = f"{section}.{key}" if section else key
            if not isinstance(items, list) or not all(isinstance(t, dict) for t in items):
                raise ValidationError(f"{sub!r} must be an array of tables", line, path)
            out[key] = [_resolve_table(sub, t, lines, path, k) for k, t in enumerate(items)]
            continue
        if key not in table:
            if default is _REQUIRED:
                raise ValidationError(f"missing required key {key!r}", line, path)
            out[key] = copy.deepcopy(default)
            continue
        out[key] = _check(kind, table[key], (line, path))
    return out


def _line(lines, section, key=None):
    return lines.get((section, key), lines.get((section, None)))


def _validate(sc: dict, lines: dict, path) -> None:
    def bad(msg, section, key=None):
        raise ValidationError(msg, _line(lines, section, key), path)

    run, tol, fam = sc["run"], sc["tolerances"], sc["family"]
    if run["window"] < 2:
        bad(f"run.window must be >= 2, got {run['window']}", "run", "window")
    if run["grid"] < 16 or run["grid"] % 2:
        bad(f"run.grid must be an even integer >= 16, got {run['grid']}", "run", "grid")
    for k, v in tol.items():
        if not v > 0:
            bad(f"tolerances.{k} must be > 0, got {v}", "tolerances", k)
    if run["horizon"] < 1:
        bad("run.horizon must be >= 1", "run", "horizon")
    if run["depth"] < 2:
        bad("run.depth must be >= 2", "run", "depth")
    if run["side"] not in ("u", "s"):
        bad("run.side must be 'u' or 's'", "run", "side")
    for c in run["commands"]:
        if c not in COMMANDS:
            bad(f"unknown command {c!r} in run.commands", "run", "commands")
    if fam["metric"] not in ("constant", "example23", "example24"):
        bad(f"family.metric must be constant, example23 or example24, got {fam['metric']!r}", "family", "metric")
    for sec in ("decay", "probe", "coincidence"):
        if sc[sec]["horizon"] < 2:
            bad(f"{sec}.horizon must be >= 2", sec, "horizon")
    for k, pair in enumerate(sc["decay"]["pair"]):
        if pair["q"] is None and pair["along"] not in ("s", "u"):
            bad("decay.pair.along must be 's' or 'u'", "decay.pair", "along")
    if sc["probe"]["separation"] == 0:
        bad("probe.separation must be nonzero", "probe", "separation")
    sp = sc["params"]
    if not sp["safety"] >= 1.0:
        bad("params.safety must be >= 1", "params", "safety")


def parse_scenario(text: str, path=None) -> dict:
    """Parse and validate a scenario, returning the resolved dictionary (defaults filled in)."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        raise ValidationError(f"TOML syntax error: {e}", int(m.group(1)) if m else None, path) from None
    lines = key_lines(text)
    for key in raw:
        if key not in SCHEMA[""] and key not in SCHEMA:
            raise ValidationError(f"unknown key {key!r}", _line(lines, key) or lines.get(("", key)), path)
    top = {k: v for k, v in raw.items() if k in SCHEMA[""]}
    sc = _resolve_table("", top, lines, path)
    for section in ("family", "run", "tolerances", "params", "decay", "probe", "coincidence"):
        table = raw.get(section, {})
        if not isinstance(table, dict):
            raise ValidationError(f"{section!r} must be a table", _line(lines, "", section), path)
        sc[section] = _resolve_table(section, table, lines, path)
    _validate(sc, lines, path)
    try:
        build_family(sc)
    except AnosovFamilyError as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(f"invalid family: {e}", _line(lines, "family"), path) from None
    return sc


def bundled_scenarios() -> dict:
    """Name -> path of the scenario files shipped with the package."""
    root = resources.files("anosovfam") / "scenarios"
    return {Path(p.name).stem: Path(str(p)) for p in sorted(root.iterdir(), key=lambda p: p.name) if p.name.endswith(".toml")}


def load_scenario(path_or_name) -> dict:
    p = Path(path_or_name)
    if not p.exists():
        known = bundled_scenarios()
        if str(path_or_name) in known:
            p = known[str(path_or_name)]
        else:
            raise ValidationError(f"no scenario file {path_or_name!r} (bundled: {', '.join(known)})")
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ValidationError(f"cannot read scenario: {e}", path=str(p)) from None
    return parse_scenario(text, str(p))


def family_window(sc: dict) -> int:
    run = sc["run"]
    span = max(run["window"], run["horizon"], sc["decay"]["horizon"], sc["probe"]["horizon"], sc["coincidence"]["horizon"])
    return span + run["depth"] + 2


def build_family(sc: dict) -> NsdsFamily:
    fam = sc["family"]
    perts = [Perturbation(t["amplitude"], tuple(t["frequency"]), t["target"], t["phase"]) for t in fam["perturbation"]]
    f = TorusMap(np.array(fam["linear"]), perts, fam["epsilon"] if perts else 0.0)
    window = family_window(sc)
    kind = fam["metric"]
    if kind == "constant":
        g = np.array(fam["metric_matrix"], dtype=float)
        metric = lambda i: MetricTensor(g, i)
    elif kind == "example23":
        a, b = fam["a"], fam["b"]
        metric = lambda i: example23_metric(i, a, b)
    else:
        law = zeta_law(
            fam["zeta_law"],
            value=fam["zeta_value"],
            offset=fam["zeta_offset"],
            base=fam["zeta_base"],
            ratio=fam["zeta_ratio"],
        )
        metric = lambda i: example24_metric(i, law(i))
    family = NsdsFamily(lambda i: f, metric, window, sc["name"])
    family.metric(0)
    return family
