"""
Command line front end.

    anosovfam --command verify --scenario cat --out out/
    anosovfam --command manifold --side s --scenario perturbed_cat --out out/

``--scenario`` takes a TOML path or the name of a bundled scenario.  Every
command writes ``<command>.json`` (the report plus the resolved scenario) and
CSV traces; ``manifold`` also writes one SVG per component index.

Exit codes: 0 success, 2 validation, 3 infeasible schedule, 4 non-convergence,
5 internal.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import errors
from .family import TorusPoint
from .graph_transform import build_charted_step, rate_table, schedule_deltas, stable_manifold, unstable_manifold
from .hyperbolicity import (
    angles_sequence,
    estimate_lambda,
    frames_along_orbit,
    orbit_points,
    property_of_angles,
    verify_anosov,
)
from .orbits import coincidence_for_family, decay_report, expansivity_probe
from .scenario import COMMANDS, build_family, bundled_scenarios, load_scenario

EXIT_OK, EXIT_VALIDATION, EXIT_SCHEDULE, EXIT_CONVERGENCE, EXIT_INTERNAL = 0, 2, 3, 4, 5

_EXIT_FOR = [
    ((errors.ValidationError, errors.DomainError), EXIT_VALIDATION),
    (
        (errors.ScheduleInfeasibleError, errors.HyperbolicityMarginError, errors.CapViolationError, errors.CoverageError),
        EXIT_SCHEDULE,
    ),
    (
        (errors.NonConvergenceError, errors.InsufficientDepthError, errors.InversionError, errors.TruncationError),
        EXIT_CONVERGENCE,
    ),
]


def exit_code(err: BaseException) -> int:
    for types, code in _EXIT_FOR:
        if isinstance(err, types):
            return code
    return EXIT_INTERNAL


# ---------------------------------------------------------------------------
# serialization


def _clean(x):
    """JSON-safe, deterministic copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else ""
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def svg_polyline(xy: np.ndarray, size: int = 1000) -> str:
    """Fundamental domain ``[0,1)^2`` drawn on a ``size x size`` canvas, y axis up."""
    pts = " ".join(f"{size * x:.3f},{size * (1 - y):.3f}" for x, y in np.asarray(xy, float))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size} {size}" width="{size}" height="{size}">\n'
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="none" stroke="#999"/>\n'
        f'<polyline fill="none" stroke="#000" stroke-width="2" points="{pts}"/>\n'
        "</svg>\n"
    )


def _log_rows(trace, sign=1):
    with np.errstate(divide="ignore"):
        logs = np.log(np.asarray(trace, float))
    return [(sign * n, float(v) if trace[n] >= 1e-14 else None) for n, v in enumerate(logs)]


# ---------------------------------------------------------------------------
# commands


def _anchor(sc):
    return TorusPoint(0, np.array(sc["run"]["anchor"], dtype=float))


def cmd_verify(sc, family):
    run = sc["run"]
    N = run["window"]
    frames = frames_along_orbit(
        family, _anchor(sc), -N, N, run["depth"], sc["tolerances"]["splitting_residual"], dtype=np.longdouble
    )
    lam = run["lambda"] if run["lambda"] is not None else estimate_lambda(frames.values())
    cert = verify_anosov(family, list(frames.values()), run["c"], lam, run["horizon"])
    ang = angles_sequence(family, frames)
    ok, mu = property_of_angles(ang.theta, run["margin"])
    report = {
        "lambda": lam,
        "certificate": {
            "passed": cert.passed,
            "c": cert.c,
            "lambda": cert.lam,
            "horizon": cert.horizon,
            "samples_checked": cert.samples_checked,
            "max_violation": cert.max_violation,
            "window_used": cert.window_used,
            "worst": list(cert.worst),
        },
        "angles": {"indices": list(ang.indices), "theta": list(ang.theta), "cos": list(ang.cos)},
        "property_of_angles": {"holds": ok, "max_cos": mu, "margin": run["margin"]},
        "frames": {
            str(n): {"e_s": fr.e_s, "e_u": fr.e_u, "mu": fr.mu_local, "kappa": fr.kappa_local, "residual": fr.residual}
            for n, fr in frames.items()
        },
    }
    rows = zip(ang.indices, ang.theta, ang.cos)
    return report, {"verify_angles.csv": csv_text(["n", "theta", "cos_theta"], rows)}


def _pipeline(sc, family):
    run, prm = sc["run"], sc["params"]
    N = run["window"]
    p = _anchor(sc)
    frames = frames_along_orbit(family, p, -N, N, run["depth"], sc["tolerances"]["splitting_residual"])
    pts = orbit_points(family, 0, p.xy, -N, N)
    steps = {n: build_charted_step(family, pts, frames, n) for n in range(-N, N)}
    lam = run["lambda"] if run["lambda"] is not None else max(max(s.mu, s.kappa) for s in steps.values())
    rates = rate_table(steps, lam, prm["gamma"], prm["lambda_tilde"])
    return frames, steps, rates


def cmd_schedule(sc, family):
    frames, steps, rates = _pipeline(sc, family)
    sched = schedule_deltas(family, steps, rates, sc["params"]["sigma_grid"], sc["params"]["safety"])
    idx = sorted(sched.delta)
    table = {
        str(n): {
            "mu": rates.mu.get(n),
            "kappa": rates.kappa.get(n),
            "omega": rates.omega.get(n),
            "tau": rates.tau.get(n),
            "varpi": rates.varpi.get(n),
            "varsigma": rates.varsigma.get(n),
            "sigma": sched.sigma.get(n),
            "delta": sched.delta[n],
            "cap": sched.cap[n],
            "binding": sched.binding[n],
        }
        for n in idx
    }
    report = {
        "lambda": rates.lam,
        "alpha": rates.alpha,
        "gamma": rates.gamma,
        "lambda_tilde": rates.lam_tilde,
        "certified": sched.certified,
        "violation": sched.violation,
        "table": table,
    }
    cols = ["mu", "kappa", "omega", "tau", "varpi", "varsigma", "sigma", "delta", "cap"]
    rows = [[n] + [table[str(n)][c] for c in cols] for n in idx]
    if not sched.certified:
        raise errors.ScheduleInfeasibleError(sched.violation, "sigma_n >= omega_n after the recurrence sweep")
    return report, {"schedule.csv": csv_text(["n"] + cols, rows)}


def cmd_manifold(sc, family, side):
    run, prm = sc["run"], sc["params"]
    fn = unstable_manifold if side == "u" else stable_manifold
    res = fn(
        family,
        _anchor(sc),
        run["window"],
        run["grid"],
        sc["tolerances"]["fixed_point"],
        lam=run["lambda"],
        gamma=prm["gamma"],
        lam_tilde=prm["lambda_tilde"],
        zeta=prm["zeta"],
        safety=prm["safety"],
        depth=run["depth"],
        splitting_tol=sc["tolerances"]["splitting_residual"],
        sigma_grid=prm["sigma_grid"],
    )
    props = res.properties
    gf = res.graphs
    report = {
        "side": side,
        "window": res.window,
        "grid": res.M,
        "lambda": res.rates.lam,
        "alpha": res.rates.alpha,
        "gamma": res.rates.gamma,
        "lambda_tilde": res.rates.lam_tilde,
        "sweeps": gf.sweeps,
        "trace": gf.trace,
        "sup_norm": gf.sup_norm(),
        "properties": props,
        "delta": {str(n): d for n, d in sorted(res.schedule.delta.items())},
    }
    rows = []
    files = {}
    sign = 1 if side == "u" else -1
    for n in sorted(res.points):
        g = gf.graphs[sign * n]
        pts = res.points[n]
        for w, phi, (x, y) in zip(g.grid, g.values, pts):
            rows.append((n, w, phi, x, y))
        files[f"manifold_{side}_{n}.svg"] = svg_polyline(pts)
    files[f"manifold_{side}.csv"] = csv_text(["n", "w", "phi", "x", "y"], rows)
    return report, files


def cmd_decay(sc, family):
    dc = sc["decay"]
    p = _anchor(sc)
    pairs = dc["pair"] or [{"along": "s", "size": 0.001, "q": None}, {"along": "u", "size": 0.001, "q": None}]
    fr = None
    out, files = [], {}
    for k, pair in enumerate(pairs):
        if pair["q"] is not None:
            rep = decay_report(family, p, TorusPoint(0, np.array(pair["q"])), dc["epsilon"], dc["horizon"])
        else:
            if fr is None:
                fr = frames_along_orbit(family, p, 0, 0, sc["run"]["depth"], dtype=np.longdouble)[0]
            v = fr.e_s if pair["along"] == "s" else fr.e_u
            rep = decay_report(family, p, epsilon=dc["epsilon"], horizon=dc["horizon"], offset=pair["size"] * v)
        d = rep.as_dict()
        d["pair"] = pair
        out.append(d)
        rows = _log_rows(rep.backward, -1)[:0:-1] + _log_rows(rep.forward)
        files[f"decay_{k}.csv"] = csv_text(["n", "log_distance"], rows)
    return {"reports": out}, files


def cmd_coincidence(sc, family):
    prm = sc["params"]
    rep, frames, rates = coincidence_for_family(
        family,
        _anchor(sc),
        sc["coincidence"]["horizon"],
        sc["run"]["lambda"],
        prm["gamma"],
        prm["lambda_tilde"],
        prm["zeta"],
        sc["run"]["depth"],
        sc["tolerances"]["splitting_residual"],
    )
    d = rep.as_dict()
    d["lambda"] = rates.lam
    h = rep.horizon
    tail = range(math.ceil(h / 2), h + 1)
    rows = zip(tail, rep.omega_terms, rep.theta_terms)
    return d, {"coincidence.csv": csv_text(["n", "omega_term", "theta_term"], rows)}


def cmd_probe(sc, family):
    pr = sc["probe"]
    res = expansivity_probe(
        family,
        pr["samples"],
        pr["horizon"],
        sc["seed"],
        pr["separation"],
        start=pr["start"],
        depth=sc["run"]["depth"],
        backward_horizon=pr["backward_horizon"],
    )
    rows = _log_rows(res.backward, -1)[:0:-1] + _log_rows(res.forward)
    return res.as_dict(), {"probe.csv": csv_text(["n", "log_distance"], rows)}


def run(command: str, scenario, out_dir, side: str | None = None) -> dict:
    """Execute one command and write its artifacts; returns the JSON report."""
    sc = scenario if isinstance(scenario, dict) else load_scenario(scenario)
    family = build_family(sc)
    side = side or sc["run"]["side"]
    if command == "verify":
        report, files = cmd_verify(sc, family)
    elif command == "schedule":
        report, files = cmd_schedule(sc, family)
    elif command == "manifold":
        report, files = cmd_manifold(sc, family, side)
    elif command == "decay":
        report, files = cmd_decay(sc, family)
    elif command == "coincidence":
        report, files = cmd_coincidence(sc, family)
    elif command == "probe-expansivity":
        report, files = cmd_probe(sc, family)
    else:
        raise errors.ValidationError(f"unknown command {command!r}")
    report = {"command": command, "scenario": sc, "report": report}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = command if command != "manifold" else f"manifold_{side}"
    (out / f"{stem}.json").write_text(dumps(report), encoding="utf-8")
    for name, text in sorted(files.items()):
        (out / name).write_text(text, encoding="utf-8")
    return report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anosovfam", description="Hyperbolicity and invariant manifolds of Anosov families on 2-tori.")
    ap.add_argument("--scenario", help="TOML scenario path or bundled scenario name")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--command", choices=COMMANDS + ("all",), default="all", help="'all' runs the scenario's run.commands")
    ap.add_argument("--side", choices=("u", "s"), default=None, help="manifold side (default: scenario run.side)")
    ap.add_argument("--quiet", action="store_true")
    ap.add_argument("--list", action="store_true", help="list bundled scenarios and exit")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list:
        for name, path in bundled_scenarios().items():
            print(f"{name}\t{path}")
        return EXIT_OK
    if not args.scenario:
        print("error: --scenario is required", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        sc = load_scenario(args.scenario)
        cmds = sc["run"]["commands"] if args.command == "all" else [args.command]
        for c in cmds:
            rep = run(c, sc, args.out, args.side)
            if not args.quiet:
                print(_summary(c, rep["report"]))
    except errors.AnosovFamilyError as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code(e)
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def _summary(command, r) -> str:
    if command == "verify":
        c = r["certificate"]
        return f"verify: lambda={r['lambda']:.6f} passed={c['passed']} max_violation={c['max_violation']:.3e}"
    if command == "schedule":
        return f"schedule: certified={r['certified']} min delta={min(v['delta'] for v in r['table'].values()):.4g}"
    if command == "manifold":
        return f"manifold {r['side']}: sweeps={r['sweeps']} sup|phi|={r['sup_norm']:.3e}"
    if command == "decay":
        return "decay: " + "; ".join(f"theta={d['theta']:.4f} omega={d['omega']:.4f}" for d in r["reports"])
    if command == "coincidence":
        return f"coincidence: cccc={r['cccc_satisfied']} omega~={r['omega_tilde']:.4f} theta~={r['theta_tilde']:.4f}"
    return f"probe: witness={'yes' if r['witness'] else 'none'} after {r['tested']} candidates"


if __name__ == "__main__":
    raise SystemExit(main())
