"""Command-line front end: simulate / billiard / verify / plot.

Every run is reproducible from (config, seed): outputs are CSV (bulk
numbers, 17 significant digits), JSON (summaries) and SVG (figures), all
byte-deterministic.  Exit codes: 0 ok, 1 check failure, 2 config error,
3 numeric singularity.  CONFOCAL_LOG selects the log level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import billiard as bl
from . import lax as lx
from . import svgplot
from .config import (
    billiard_from_config,
    dump_json,
    fmt,
    initial_states,
    load_config,
    system_from_config,
)
from .dynamics import constraint_residuals, energy, integrate
from .errors import (
    ConfigError,
    ConfocalError,
    EscapeError,
    GrazingOrSingularError,
    MultiplierSingularError,
    PoleError,
    ProjectionError,
    ReductionSingularError,
    SingularAxisError,
)
from .lax import CheckRecord
from .suites import SUITES, run_suites

log = logging.getLogger("confocal")

_SINGULAR = (GrazingOrSingularError, SingularAxisError, MultiplierSingularError,
             EscapeError, PoleError, ProjectionError, ReductionSingularError)

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_SINGULARITY = 3


@dataclass
class RunReport:
    """Per-check records plus the overall pass flag."""

    records: list[CheckRecord]

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.records)

    def to_json(self) -> dict:
        return {
            "checks": [
                {"name": r.name, "value": r.value, "threshold": r.threshold,
                 "pass": bool(r.passed)}
                for r in self.records
            ],
            "pass": self.ok,
        }


def _write_table(path: Path, header: list[str], rows: list[list[float]],
                 as_json: bool) -> None:
    if as_json:
        payload = {"columns": header,
                   "rows": [[fmt(v) for v in row] for row in rows]}
        dump_json(payload, path.with_suffix(".json"))
    else:
        lines = [",".join(header)]
        lines.extend(",".join(fmt(v) for v in row) for row in rows)
        path.with_suffix(".csv").write_text("\n".join(lines) + "\n")


def _state_columns(sys, s) -> tuple[list[str], list[float]]:
    names: list[str] = []
    vals: list[float] = []
    if np.iscomplexobj(s.x):
        for tag, arr in (("x", s.x), ("y", s.y)):
            for i, v in enumerate(arr):
                names += [f"{tag}{i}_re", f"{tag}{i}_im"]
                vals += [float(v.real), float(v.imag)]
    else:
        for tag, arr in (("x", s.x), ("y", s.y)):
            for i, v in enumerate(arr):
                names.append(f"{tag}{i}")
                vals.append(float(v))
        if s.xi is not None:
            for tag, arr in (("xi", s.xi), ("eta", s.eta)):
                for i, v in enumerate(arr):
                    names.append(f"{tag}{i}")
                    vals.append(float(v))
    return names, vals


def cmd_simulate(cfg: dict, seed: int, out_dir: Path, as_json: bool) -> int:
    sys_ = system_from_config(cfg)
    states = initial_states(cfg, sys_, seed)
    ic = cfg.get("integrator", {})
    h = ic.get("h", 1e-3)
    T = ic.get("T", 10.0)
    ctol = ic.get("ctol", 1e-9)
    drift_tol = cfg.get("drift_tol", 1e-7)
    summary_runs = []
    worst = 0.0
    for run_idx, s0 in enumerate(states):
        traj = integrate(sys_, s0, T, h, ctol)
        fam0 = lx.integral_family(sys_, s0) if sys_.kind != "free_oscillator" else None
        f0 = None
        if fam0 is not None:
            f0 = fam0.f if fam0.f is not None else fam0.ftilde
        H0 = energy(sys_, s0)
        header = None
        rows = []
        dH = dF = dC = 0.0
        for s in traj:
            cols, vals = _state_columns(sys_, s)
            res = constraint_residuals(sys_, s)
            hval = energy(sys_, s)
            fvals = []
            if fam0 is not None:
                fam = lx.integral_family(sys_, s)
                fv = fam.f if fam.f is not None else fam.ftilde
                fvals = [float(v) for v in fv]
                dF = max(dF, max(abs(v - v0) / max(abs(v0), 1e-3)
                                 for v, v0 in zip(fv, f0)))
            if header is None:
                header = (["t"] + cols + [f"F{i+1}" for i in range(res.size)]
                          + ["H"] + [f"f{i}" for i in range(len(fvals))])
            rows.append([s.t] + vals + [float(r) for r in res] + [hval] + fvals)
            dH = max(dH, abs(hval - H0) / max(abs(H0), 1e-3))
            if res.size:
                dC = max(dC, float(np.max(np.abs(res))))
        _write_table(out_dir / f"trajectory_{run_idx}", header, rows, as_json)
        d0 = np.max(np.abs(traj[-1].x - traj[0].x)) + np.max(np.abs(traj[-1].y - traj[0].y))
        summary_runs.append({
            "run": run_idx,
            "energy_drift": fmt(dH),
            "integral_drift": fmt(dF),
            "constraint_max": fmt(dC),
            "closure_distance": fmt(float(np.real(d0))),
        })
        worst = max(worst, dH, dF)
        log.info("run %d: energy drift %.3e, integral drift %.3e", run_idx, dH, dF)
    dump_json({"kind": sys_.kind, "T": T, "h": h, "drift_tol": drift_tol,
               "runs": summary_runs, "pass": bool(worst <= drift_tol)},
              out_dir / "summary.json")
    return EXIT_OK if worst <= drift_tol else EXIT_CHECK_FAILURE


def cmd_billiard(cfg: dict, seed: int, out_dir: Path, as_json: bool) -> int:
    spec, s0, opts = billiard_from_config(cfg, seed)
    orbit = bl.run_orbit(spec, s0, opts["bounces"])
    header = (["k"] + [f"x{i}" for i in range(spec.dim)]
              + [f"y{i}" for i in range(spec.dim)] + ["J"])
    rows = []
    for s in orbit.impacts:
        rows.append([float(s.k)] + [float(v) for v in s.x] + [float(v) for v in s.y]
                    + [bl.impact_invariant(spec, s)])
    _write_table(out_dir / "impacts", header, rows, as_json)
    caustic_report = bl.orbit_caustics(spec, orbit)
    checks = [
        CheckRecord("caustic-count", 0.0 if caustic_report["count_ok"] else 1.0, 0.5),
        CheckRecord("caustic-drift", caustic_report["caustic_drift"], 1e-7),
        CheckRecord("det-invariance", orbit.det_drift, 1e-8),
        CheckRecord("conjugation-residual", orbit.lax_residual, 1e-6),
    ]
    if caustic_report["tangency_max"] is not None:
        checks.append(CheckRecord("tangency", caustic_report["tangency_max"], 1e-8))
    if opts["oracle_check"]:
        worst = 0.0
        s = s0
        for _ in range(min(opts["bounces"], 100)):
            s_next = bl.jr_step(spec, s)
            s_orc = bl.oracle_step(spec, s)
            worst = max(worst, float(np.max(np.abs(s_next.x - s_orc.x))),
                        float(np.max(np.abs(s_next.y - s_orc.y))))
            s = s_next
        checks.append(CheckRecord("map-vs-oracle", worst, opts["oracle_tol"]))
    summary = {
        "axes": list(spec.axes),
        "sigma": spec.sigma,
        "mu": list(spec.mu),
        "bounces": opts["bounces"],
        "caustics": [fmt(v) for v in caustic_report["etas"]],
        "expected_caustic_count": caustic_report["expected_count"],
        "checks": RunReport(checks).to_json()["checks"],
    }
    if opts["poncelet_max"]:
        det = bl.poncelet_detect(spec, s0, opts["poncelet_max"])
        summary["poncelet"] = {
            "period": det["period"],
            "closure_error": None if det["closure_error"] is None
            else fmt(det["closure_error"]),
        }
    report = RunReport(checks)
    summary["pass"] = report.ok
    dump_json(summary, out_dir / "billiard_summary.json")
    for rec in checks:
        log.info("%-24s %s  (%.3e <= %.3e)", rec.name,
                 "pass" if rec.passed else "FAIL", rec.value, rec.threshold)
    return EXIT_OK if report.ok else EXIT_CHECK_FAILURE


def cmd_verify(cfg: dict, seed: int, out_dir: Path, suite_names, overrides) -> int:
    # an explicitly empty selection is a trivially passing (empty) report
    if suite_names is not None:
        names = suite_names
    elif "suites" in cfg:
        names = cfg["suites"]
    else:
        names = list(SUITES)
    tol_overrides = dict(cfg.get("tolerances", {}))
    tol_overrides.update(overrides)
    records = run_suites(names, seed=seed, overrides=tol_overrides)
    report = RunReport(records)
    dump_json(report.to_json(), out_dir / "verify_report.json")
    for rec in records:
        print(f"{'PASS' if rec.passed else 'FAIL'} {rec.name}: "
              f"{rec.value:.3e} (<= {rec.threshold:.3e})")
    print(f"{'PASS' if report.ok else 'FAIL'} verify: "
          f"{sum(r.passed for r in records)}/{len(records)} checks")
    return EXIT_OK if report.ok else EXIT_CHECK_FAILURE


def _read_table(path: Path) -> tuple[list[str], np.ndarray]:
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return header, data


def cmd_plot(cfg: dict, out_dir: Path) -> int:
    pc = cfg.get("plot", {})
    kind = pc.get("kind", "trajectory")
    axes = pc.get("axes")
    caustics = pc.get("caustics", ())
    mu = pc.get("mu")
    if kind == "domain":
        svg = svgplot.render(axes=axes, mu=mu, title="billiard domain")
    else:
        if "input" not in pc:
            raise ConfigError("plot needs an 'input' table for this kind")
        header, data = _read_table(Path(pc["input"]))
        cols = pc.get("columns", ["x0", "x1"])
        try:
            idx = [header.index(c) for c in cols]
        except ValueError as exc:
            raise ConfigError(f"plot: column not in table: {exc}") from exc
        pts = data[:, idx] if data.size else np.zeros((0, 2))
        if kind == "orbit":
            svg = svgplot.render(axes=axes, mu=mu, chords=pts, caustics=caustics,
                                 title="billiard orbit")
        else:
            svg = svgplot.render(axes=axes, mu=mu, trajectory=pts,
                                 caustics=caustics, title="trajectory")
    (out_dir / "plot.svg").write_text(svg)
    return EXIT_OK


def _parse_tol_overrides(text: str | None) -> dict:
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"bad --tol-overrides entry {item!r}, want NAME=VALUE")
        name, val = item.split("=", 1)
        try:
            out[name.strip()] = float(val)
        except ValueError as exc:
            raise ConfigError(f"bad tolerance value in {item!r}") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="confocal",
        description="flows, Lax pairs and billiards on ellipsoids")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("simulate", "integrate a flow and report drifts"),
                        ("billiard", "iterate the bounce map and its invariants"),
                        ("verify", "run the verification suites"),
                        ("plot", "render a trajectory/orbit/domain figure")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=(name != "verify"),
                       help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default=None,
                       help="bulk output format")
        if name == "verify":
            p.add_argument("--suite", action="append", default=None,
                           help="suite name (repeatable); default: config or all")
            p.add_argument("--tol-overrides", default=None,
                           help="comma-separated NAME=VALUE tolerance overrides")
    return ap


def main(argv=None) -> int:
    level = os.environ.get("CONFOCAL_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {"version": 1}
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        out_cfg = cfg.get("output", {})
        out_dir = Path(args.out or out_cfg.get("dir", "out"))
        out_dir.mkdir(parents=True, exist_ok=True)
        as_json = (args.format or out_cfg.get("format", "csv")) == "json"
        if args.command == "simulate":
            return cmd_simulate(cfg, seed, out_dir, as_json)
        if args.command == "billiard":
            return cmd_billiard(cfg, seed, out_dir, as_json)
        if args.command == "verify":
            overrides = _parse_tol_overrides(args.tol_overrides)
            return cmd_verify(cfg, seed, out_dir, args.suite, overrides)
        if args.command == "plot":
            return cmd_plot(cfg, out_dir)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except _SINGULAR as exc:
        print(f"numeric singularity: {exc}", file=sys.stderr)
        return EXIT_SINGULARITY
    except ConfocalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILURE


if __name__ == "__main__":
    sys.exit(main())
