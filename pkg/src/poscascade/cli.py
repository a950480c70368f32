"""Command line: ``run``, ``certify``, ``presets`` and ``show``.

Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 runtime
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .certify import AnalysisParams, CertificateError, certify, estimate_c1_m, feasibility_search
from .config import PRESET_NOTES, PRESETS, ConfigError, ScenarioConfig, dump_config, parse_config
from .errcascade import ErrorBoundExceeded
from .model import ModelError
from .sim import SimulationError, Trajectory, metrics, run_scenario

log = logging.getLogger("poscascade")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def write_csv(traj: Trajectory, path) -> Path:
    """Header plus one row per recorded sample, 12 significant digits."""
    path = Path(path)
    cols = traj.columns()
    rows = traj.table()
    with path.open("w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(format(v, ".12g") for v in row) + "\n")
    return path


def _clean(obj):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def analysis_params(cfg: ScenarioConfig, traj: Optional[Trajectory]) -> AnalysisParams:
    """Configured analysis constants, with nulls filled from a completed run."""
    an = cfg.analysis
    sc = cfg.scenario
    est = sc.estimate()
    ttb, c1, m = an["tau_tilde_bar"], an["c1"], an["m"]
    if traj is not None:
        if ttb is None:
            ttb = float(np.max(np.abs(traj.tau - est.tau_hat)))
        if c1 is None or m is None:
            c1_est, m_est = estimate_c1_m(traj, sc.reference, sc.plant.d[-1])
            c1 = c1_est if c1 is None else c1
            m = m_est if m is None else m
    return AnalysisParams(eps1=an["eps1"], eps2=an["eps2"], omega1=an["omega1"],
                          omega2=an["omega2"], omega3=an["omega3"], tau_hat=est.tau_hat,
                          tau_tilde_bar=ttb or 0.0, phi2=an["phi2"], c1=c1 or 0.0,
                          m=m or 0.0, psi=cfg.sim.psi)


def certificate_document(cfg: ScenarioConfig, traj: Optional[Trajectory]) -> dict:
    sc = cfg.scenario
    a = analysis_params(cfg, traj)
    cert = certify(sc.gains, a, sc.delay, sc.plant.d[-1])
    search = feasibility_search(sc.gains, a.tau_hat, phi2=a.phi2, omega2=a.omega2,
                                c1=a.c1, m=a.m)
    return {"name": cfg.name, "certificate": cert.to_dict(), "search": search.to_dict(),
            "slew_threshold": sc.delay.slew_threshold(sc.plant.d[-1])}


def summary_document(cfg: ScenarioConfig, traj: Trajectory, cert_doc: dict) -> dict:
    met = metrics(traj, band=cfg.sim.settle_band)
    cert = cert_doc["certificate"]
    return {
        "name": cfg.name,
        "provenance": {"config_sha256": cfg.digest(), "dt": cfg.sim.dt,
                       "t_end": cfg.sim.t_end, "steps": cfg.sim.nsteps,
                       "record_stride": cfg.sim.record_stride, "version": __version__},
        "metrics": asdict(met),
        "final": {"x": traj.x[-1].tolist(), "nu": float(traj.nu[-1]),
                  "e1": float(traj.e[-1, 0])},
        "monitor": None if traj.V is None else {
            "V_min": float(np.min(traj.V)), "V_max": float(np.max(traj.V))},
        "certificate": {k: cert[k] for k in ("feasible", "sigma", "delta", "uub")},
    }


def run_command(cfg: ScenarioConfig, outdir, backend: Optional[str] = None) -> int:
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log.error("cannot create %s: %s", outdir, exc)
        return EXIT_IO
    try:
        traj = run_scenario(cfg.scenario, cfg.sim, backend=backend)
        cert_doc = certificate_document(cfg, traj)
    except (SimulationError, ErrorBoundExceeded, ModelError, CertificateError) as exc:
        log.error("runtime invariant violated: %s", exc)
        return EXIT_RUNTIME
    summary = summary_document(cfg, traj, cert_doc)
    try:
        write_csv(traj, outdir / f"{cfg.name}_trajectory.csv")
        _dump_json(summary, outdir / f"{cfg.name}_summary.json")
        _dump_json(cert_doc, outdir / f"{cfg.name}_certificate.json")
    except OSError as exc:
        log.error("write failed: %s", exc)
        return EXIT_IO
    m = summary["metrics"]
    print(f"{cfg.name}: ISE={m['ise']:.6g} band={m['ultimate_band']:.4g} "
          f"switches={m['switch_count']} clamps={m['clamp_count']} -> {outdir}")
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = parse_config(args.source, args.set)
    return run_command(cfg, args.out, backend=args.backend)


def _cmd_certify(args) -> int:
    cfg = parse_config(args.source, args.set)
    try:
        traj = run_scenario(cfg.scenario, cfg.sim, backend=args.backend)
        doc = certificate_document(cfg, traj)
    except (SimulationError, ErrorBoundExceeded, ModelError, CertificateError) as exc:
        log.error("runtime invariant violated: %s", exc)
        return EXIT_RUNTIME
    cert, search = doc["certificate"], doc["search"]
    for name, ok in cert["conditions"].items():
        print(f"  {name:<10} {'ok' if ok else 'VIOLATED'}")
    print(f"sigma={cert['sigma']:.6g} delta={cert['delta']:.6g} uub={cert['uub']} "
          f"feasible={cert['feasible']}")
    if search["feasible"]:
        print(f"search: feasible, delta={search['certificate']['delta']:.6g}")
    else:
        print(f"search: infeasible, blocking={search['blocking']} "
              f"unsatisfiable={search['unsatisfiable']}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(doc, out / f"{cfg.name}_certificate.json")
    return EXIT_OK


def _cmd_presets(args) -> int:
    for name in PRESETS:
        print(f"{name:<9} {PRESET_NOTES[name]}")
    return EXIT_OK


def _cmd_show(args) -> int:
    cfg = parse_config(args.source, args.set)
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="poscascade", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("source", help="preset name or YAML file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. sim.dt=0.005")
        p.add_argument("--backend", choices=["auto", "cython", "python"], default=None)

    p = sub.add_parser("run", help="simulate, certify and write CSV/summary/certificate")
    common(p)
    p.add_argument("--out", default="out")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("certify", help="evaluate gain conditions and search for feasibility")
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_certify)
    p = sub.add_parser("presets", help="list built-in scenarios")
    p.set_defaults(func=_cmd_presets)
    p = sub.add_parser("show", help="print a scenario as editable YAML")
    common(p)
    p.set_defaults(func=_cmd_show)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except ValueError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
