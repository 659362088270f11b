"""Command-line front end.

Subcommands::

    shipdob run CONFIG          simulate a scenario document or re-run a manifest.json
    shipdob preset NAME         run a built-in scenario (see ``shipdob preset --list``)
    shipdob validate [CONFIG]   check every invariant and print the condition report
    shipdob derive [CONFIG]     print kappa, sigma, T, T M^-1, theta and r_b

Exit codes: 0 success, 1 configuration error, 2 numerical divergence.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import environment as env_mod
from . import io as io_mod
from . import observer as obs_mod
from . import sim
from . import vessel as vessel_mod
from .errors import ConfigError, DivergenceError, ShipDobError

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGENCE = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="master seed; overrides the document's seeds")
    common.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted-path document override, value parsed as JSON (repeatable)",
    )
    common.add_argument("--decimation", type=int, help="measurement decimation factor n")

    p = argparse.ArgumentParser(prog="shipdob", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="simulate one scenario")
    r.add_argument("config", help="scenario document or manifest.json")
    r.add_argument("--out", default="out", help="output directory (default: out)")

    pr = sub.add_parser("preset", parents=[common], help="run a built-in scenario")
    pr.add_argument("name", nargs="?", help="preset name")
    pr.add_argument("--out", default=None, help="output directory (default: out/<name>)")
    pr.add_argument("--list", action="store_true", help="list presets and exit")
    pr.add_argument("--dump", action="store_true", help="print the preset document and exit")
    pr.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")

    v = sub.add_parser("validate", parents=[common], help="check a scenario without simulating")
    v.add_argument("config", nargs="?", help="scenario document (default: built-in severe scenario)")

    d = sub.add_parser("derive", parents=[common], help="print derived observer quantities")
    d.add_argument("config", nargs="?", help="scenario document (default: built-in severe scenario)")
    return p


def _document_for(args) -> tuple[dict, dict]:
    """Scenario document for ``args`` and a description of where it came from."""
    path = getattr(args, "config", None)
    if path is None:
        return cfgmod.preset_document("severe-table3"), {"preset": "severe-table3"}
    doc = cfgmod.load_document(path)
    if io_mod.is_manifest(doc):
        return doc["config"], {"manifest": str(path)}
    return doc, {"document": str(path)}


def _resolve(doc: dict, args, environ=None) -> sim.ScenarioConfig:
    for assignment in args.override:
        doc = cfgmod.apply_override(doc, assignment)
    seed = args.seed if args.seed is not None else cfgmod.seed_from_env(environ)
    if seed is not None:
        doc = {k: v for k, v in doc.items() if k not in ("seed", "seeds")}
        doc["seed"] = seed
    if args.decimation is not None:
        doc = {**doc, "measurement_decimation": args.decimation}
    return cfgmod.config_from_dict(doc)


def _stability_lines(cfg: sim.ScenarioConfig) -> tuple[list[str], str]:
    stab = obs_mod.discrete_stability(cfg.gains, cfg.vessel.sigma, cfg.obs_dt)
    factors = ", ".join(f"{f:.6g}" for f in stab.factors)
    lines = [f"Gamma*sigma*dt_obs  ({factors})  {stab.status}"]
    if stab.status == "warn":
        lines.append("warning: Gamma*sigma*dt >= 1, the discrete error recursion oscillates")
    elif stab.status == "unstable":
        lines.append("error: Gamma*sigma*dt >= 2, the discrete observer is unstable")
    return lines, stab.status


def _simulate_one(cfg, out_dir, source):
    trace, metrics = sim.run(cfg)
    paths = io_mod.emit_trace(trace, metrics, out_dir, cfg, source)
    return metrics, paths


def _report_run(name: str, metrics: sim.RunMetrics, paths: dict, out) -> None:
    zr = ", ".join("undefined" if not np.isfinite(x) else f"{x:.4g}" for x in metrics.mean_abs_zr_post)
    print(f"{name}: {metrics.n_records} records in {metrics.runtime_s:.2f} s", file=out)
    print(f"  mean |z_r| after transient  ({zr})", file=out)
    print(f"  RMSE measured  {np.array2string(metrics.rmse_measured, precision=4)}", file=out)
    print(f"  RMSE filtered  {np.array2string(metrics.rmse_filtered, precision=4)}", file=out)
    print(f"  wrote {paths['trace']}", file=out)


def cmd_run(args, out) -> int:
    doc, source = _document_for(args)
    cfg = _resolve(doc, args)
    metrics, paths = _simulate_one(cfg, Path(args.out), source)
    _report_run(Path(args.config).name, metrics, paths, out)
    return EXIT_OK


def _sweep_jobs(kind: str, cfg: sim.ScenarioConfig, values) -> list[tuple[str, sim.ScenarioConfig]]:
    if kind == "q-sweep":
        return [(f"Q_{v:g}", cfg.with_(Q=float(v) * np.eye(3))) for v in values]
    if kind == "gamma":
        amp = cfg.env.amplitude if any(cfg.env.amplitude) else (10000.0,) * 3
        env = replace(cfg.env, kind="decay", amplitude=amp)
        return [
            (f"gamma_{v:g}", cfg.with_(env=env, gains=obs_mod.ObserverGains.uniform(float(v))))
            for v in values
        ]
    if kind == "trajectory":
        return [("uncertain", cfg), ("nominal", cfg.with_(Q=np.zeros((3, 3))))]
    return [("", cfg)]


def _run_job(job):
    label, cfg, out_dir, source = job
    trace, metrics = sim.run(cfg)
    paths = io_mod.emit_trace(trace, metrics, out_dir, cfg, source)
    return label, metrics, paths


def cmd_preset(args, out) -> int:
    if args.list or args.name is None:
        for name, spec in cfgmod.PRESETS.items():
            print(f"{name:18s} {spec['about']}", file=out)
        return EXIT_OK if args.list else EXIT_CONFIG
    spec = cfgmod.PRESETS.get(args.name)
    if spec is None:
        raise ConfigError(f"unknown preset {args.name!r}; choose from {sorted(cfgmod.PRESETS)}")
    doc = cfgmod.preset_document(args.name)
    if args.dump:
        print(json.dumps(doc, indent=2), file=out)
        return EXIT_OK
    cfg = _resolve(doc, args)
    root = Path(args.out) if args.out else Path("out") / args.name
    jobs = []
    for label, c in _sweep_jobs(spec["kind"], cfg, spec.get("values", ())):
        c.validate()
        source = {"preset": args.name, "member": label or None}
        jobs.append((label, c, root / label if label else root, source))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    for label, metrics, paths in results:
        _report_run(f"{args.name} {label}".strip(), metrics, paths, out)
    if spec["kind"] == "trajectory":
        a = io_mod.read_trace(results[0][2]["trace"])[0]
        b = io_mod.read_trace(results[1][2]["trace"])[0]
        gap = float(np.linalg.norm(a.eta[-1, :2] - b.eta[-1, :2]))
        print(f"  terminal separation {gap:.6g} m", file=out)
    return EXIT_OK


def cmd_validate(args, out) -> int:
    doc, _ = _document_for(args)
    cfg = _resolve(doc, args)
    cfg.validate()
    k = vessel_mod.invert_mass(cfg.vessel)
    T, _ = obs_mod.build_T(cfg.gains, k)
    report = obs_mod.check_conditions(T, k, cfg.gains)
    for line in report.lines():
        print(line, file=out)
    lines, status = _stability_lines(cfg)
    for line in lines:
        print(line, file=out)
    print(f"records     {cfg.n_steps + 1}", file=out)
    if status == "unstable":
        return EXIT_DIVERGENCE
    if not report.conditions_ok:
        return EXIT_CONFIG
    if not report.lyapunov_ok:
        print("note: lambda_min(Gamma)*sigma <= 1/2, no ultimate bound r_b exists", file=out)
        return EXIT_CONFIG
    print("valid", file=out)
    return EXIT_OK


def cmd_derive(args, out) -> int:
    doc, _ = _document_for(args)
    cfg = _resolve(doc, args)
    cfg.validate()
    k = vessel_mod.invert_mass(cfg.vessel)
    T, sigma = obs_mod.build_T(cfg.gains, k)
    fmt = {"float_kind": lambda x: repr(float(x))}
    print(f"kappa11 {k.k11!r}", file=out)
    print(f"kappa22 {k.k22!r}", file=out)
    print(f"kappa23 {k.k23!r}", file=out)
    print(f"kappa32 {k.k32!r}", file=out)
    print(f"kappa33 {k.k33!r}", file=out)
    print(f"sigma   {sigma!r}", file=out)
    print("T =", np.array2string(T, formatter=fmt), file=out, sep="\n")
    print("T M^-1 =", np.array2string(T @ k.matrix, formatter=fmt), file=out, sep="\n")
    # theta from the noiseless load along the initial heading (no simulation)
    n = cfg.n_steps + 1
    tau_d = np.array(
        [env_mod.deterministic_disturbance(i * cfg.dt, cfg.eta0[2], cfg.env) for i in range(n)]
    )
    theta = env_mod.estimate_theta(tau_d, cfg.dt)
    print(f"theta   {theta!r}  (finite differences at fixed initial heading)", file=out)
    try:
        print(f"r_b     {obs_mod.ball_radius(cfg.gains, sigma, theta)!r}", file=out)
    except ShipDobError as exc:
        print(f"r_b     undefined ({exc})", file=out)
    for line in _stability_lines(cfg)[0]:
        print(line, file=out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "preset": cmd_preset, "validate": cmd_validate, "derive": cmd_derive}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return COMMANDS[args.command](args, out)
    except (DivergenceError, ArithmeticError) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ConfigError, ShipDobError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
