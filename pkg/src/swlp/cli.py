"""Command-line entry point: run, compare, efficiency, audit, list-scenarios."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .diagnostics import AuditUnavailable, conservation_ledger, entropy_audit, wellbalanced_residual
from .driver import Observer, RunawayError, Variant, run_to
from .io import (AUDITS, ConfigError, RunManifest, Snapshot, SnapshotWriter, StepRecordWriter, build_manifest,
                 difference_norms, read_config, read_snapshot, snapshot_array, write_summary)
from .lagrangian_explicit import CFLViolation
from .mesh_state import PositivityError
from .scenarios import NoEquilibriumError, build_scenario, list_scenarios

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_AUDIT = 0, 2, 3, 4
SOLVER_ERRORS = (PositivityError, CFLViolation, FloatingPointError, RunawayError, np.linalg.LinAlgError)

WB_REL_TOL = 1e-12
CONSERVATION_TOL = 1e-12

log = logging.getLogger("swlp")


class EntropyObserver(Observer):
    def __init__(self):
        self.worst_ratio = -np.inf
        self.worst_residual = -np.inf
        self.failed_steps = 0

    def on_step(self, state, record, data) -> None:
        audit = entropy_audit(data)
        self.worst_residual = max(self.worst_residual, audit.max_residual)
        self.worst_ratio = max(self.worst_ratio, audit.max_residual / audit.tol)
        if not audit.ok:
            self.failed_steps += 1


def _setup(manifest: RunManifest):
    try:
        scenario = build_scenario(manifest.scenario, g=manifest.g)
    except KeyError as err:
        raise ConfigError(str(err.args[0])) from None
    overrides = {"kappa": manifest.kappa, "implicit_backend": manifest.backend}
    if manifest.cfl is not None:
        overrides["cfl_factor"] = manifest.cfl
    if manifest.t_end is not None:
        overrides["t_end"] = manifest.t_end
    if manifest.dt_limit_set:
        overrides["dt_limit_factor"] = manifest.dt_limit_factor
    try:
        config = scenario.config(Variant(manifest.scheme), **overrides)
        grid, state = scenario.initial_state(manifest.cells)
    except (ValueError, TypeError) as err:
        if isinstance(err, PositivityError):
            raise
        raise ConfigError(str(err)) from None
    if "entropy" in manifest.audit and config.variant.speed_mode.value != "global":
        raise ConfigError("the entropy audit needs a uniform relaxation speed (exex-glob or imex-glob)")
    return scenario, config, grid, state


def execute(manifest: RunManifest, write_files: bool = True) -> dict:
    """Run one manifest; returns the summary dict (``status`` is 'ok' or 'failed')."""
    scenario, config, grid, state0 = _setup(manifest)
    header = {
        "scenario": scenario.name,
        "scheme": config.variant.value,
        "n_cells": grid.n_cells,
        "g": config.g,
        "cfl": config.cfl_factor,
        "kappa": config.kappa,
        "t_end": config.t_end,
        "dt_limit_factor": config.dt_limit_factor,
        "bc": config.bc.describe(),
    }
    observers: list[Observer] = []
    steps_writer = None
    snap_times = sorted(set(manifest.snapshot_times) | {config.t_end})
    out_dir = None
    if write_files:
        out_dir = Path(manifest.out or f"runs/{scenario.name}-{config.variant.value}")
        out_dir.mkdir(parents=True, exist_ok=True)
        observers.append(SnapshotWriter(out_dir, grid, header))
        steps_writer = StepRecordWriter(out_dir / "steps.csv")
        observers.append(steps_writer)
    entropy_obs = None
    if "entropy" in manifest.audit:
        entropy_obs = EntropyObserver()
        observers.append(entropy_obs)

    summary = dict(header, status="ok", error=None)
    wall0 = time.perf_counter()
    try:
        result = run_to(state0, grid, config, observers, snapshot_times=snap_times,
                        retain=entropy_obs is not None)
    except SOLVER_ERRORS as err:
        summary.update(status="failed", error=f"{type(err).__name__}: {err}")
        if steps_writer is not None:
            steps_writer.fail(summary["error"])
            write_summary(out_dir / "summary.json", summary)
        summary["wall_time"] = time.perf_counter() - wall0
        return summary
    finally:
        if steps_writer is not None:
            steps_writer.close()
    wall = time.perf_counter() - wall0

    records = result.records
    final = result.state
    summary.update(
        steps=result.n_steps,
        mean_dt=result.mean_dt,
        final_time=final.time,
        min_h=min([r.min_h for r in records], default=float(state0.h.min())),
        halvings=sum(r.halvings for r in records),
        fallback_steps=sum(r.fallback for r in records),
    )
    audits = {}
    if entropy_obs is not None:
        audits["entropy"] = {
            "max_residual": entropy_obs.worst_residual,
            "max_residual_over_tol": entropy_obs.worst_ratio,
            "tol_rel": 1e-10,
            "failed_steps": entropy_obs.failed_steps,
            "ok": entropy_obs.failed_steps == 0,
        }
    if "wb" in manifest.audit:
        u0, var0 = wellbalanced_residual(state0, grid)
        u1, var1 = wellbalanced_residual(final, grid)
        scale = float(np.max(state0.h + grid.z))
        at_rest = u0 == 0.0 and var0 <= WB_REL_TOL * scale
        ok = (u1 <= WB_REL_TOL and var1 <= WB_REL_TOL * scale) if at_rest else True
        audits["wb"] = {"initial_max_u": u0, "initial_eta_variation": var0, "final_max_u": u1,
                        "final_eta_variation": var1, "initial_lake_at_rest": at_rest, "ok": ok}
    if "conservation" in manifest.audit:
        dx = grid.dx
        m0 = float(state0.h.sum() * dx)
        p0 = float(state0.hu.sum() * dx)
        c_max = float(np.sqrt(config.g * state0.h.max()))
        p_scale = max([abs(p0), m0 * c_max] + [abs(r.total_momentum) for r in records])
        rep = conservation_ledger(records, m0, p0, momentum_scale=p_scale)
        audits["conservation"] = {"mass_drift": rep.mass_drift, "mass_imbalance": rep.mass_imbalance,
                                  "momentum_drift": rep.momentum_drift,
                                  "momentum_imbalance": rep.momentum_imbalance, "tol": CONSERVATION_TOL,
                                  "ok": rep.ok(CONSERVATION_TOL)}
    if "whitham" in manifest.audit:
        bad = sum(r.whitham_violations for r in records)
        audits["whitham"] = {"violations": bad, "ok": bad == 0}
    summary["audits"] = audits
    if out_dir is not None:
        write_summary(out_dir / "summary.json", summary)
        summary["out"] = str(out_dir)
    summary["wall_time"] = wall
    summary["final_snapshot"] = snapshot_array(final, grid)
    return summary


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value file; command-line flags override it")
    p.add_argument("--scenario", choices=list_scenarios())
    p.add_argument("--scheme", choices=[v.value for v in Variant])
    p.add_argument("--cells", type=int)
    p.add_argument("--cfl", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt-limit-factor", help="number, or 'none' to disable the scenario's limit")
    p.add_argument("--out")
    p.add_argument("--snapshot-times", help="comma-separated times")
    p.add_argument("--audit", action="append", help=f"any of {', '.join(AUDITS)} (repeat or comma-separate)")
    p.add_argument("--backend", choices=["auto", "characteristic", "coupled"])
    p.add_argument("-v", "--verbose", action="store_true")


def _manifest(args, **extra) -> RunManifest:
    file_values = read_config(args.config) if args.config else {}
    cli = {
        "scenario": args.scenario,
        "scheme": args.scheme,
        "cells": args.cells,
        "cfl": args.cfl,
        "g": args.g,
        "kappa": args.kappa,
        "t_end": args.t_end,
        "out": args.out,
        "backend": args.backend,
    }
    if args.snapshot_times is not None:
        cli["snapshot_times"] = [float(t) for t in args.snapshot_times.split(",") if t.strip()]
    if args.audit:
        cli["audit"] = [a.strip() for item in args.audit for a in item.split(",") if a.strip()]
    cli.update(extra)
    manifest = build_manifest(file_values, cli)
    if args.dt_limit_factor is not None:
        text = args.dt_limit_factor.strip().lower()
        manifest.dt_limit_factor = None if text in ("none", "off") else float(text)
        manifest.dt_limit_set = True
    return manifest


def _report(summary: dict) -> int:
    if summary["status"] != "ok":
        print(f"solver failure: {summary['error']}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{summary['scenario']} {summary['scheme']}: {summary['steps']} steps to t={summary['final_time']:.17g}, "
          f"mean dt={summary['mean_dt']:.6g}, min h={summary['min_h']:.6g}, wall={summary['wall_time']:.2f}s")
    status = EXIT_OK
    for name, res in summary.get("audits", {}).items():
        details = ", ".join(f"{k}={v}" for k, v in res.items() if k != "ok")
        print(f"  audit {name}: {'PASS' if res['ok'] else 'FAIL'} ({details})")
        if not res["ok"]:
            status = EXIT_AUDIT
    return status


def cmd_run(args) -> int:
    return _report(execute(_manifest(args)))


def cmd_audit(args) -> int:
    manifest = _manifest(args)
    if not manifest.audit:
        manifest.audit = ["wb", "conservation", "whitham"]
        if Variant(manifest.scheme).speed_mode.value == "global":
            manifest.audit.insert(0, "entropy")
    return _report(execute(manifest, write_files=args.out is not None))


def _workers(n_jobs: int) -> int:
    env = os.environ.get("SWLP_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(n_jobs, cap))


def _run_quiet(manifest: RunManifest) -> dict:
    return execute(manifest, write_files=False)


def _run_many(manifests: list[RunManifest]) -> list[dict]:
    workers = _workers(len(manifests))
    if workers == 1:
        return [_run_quiet(m) for m in manifests]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_quiet, manifests))


def _as_snapshot(summary: dict, manifest: RunManifest) -> Snapshot:
    scenario = build_scenario(manifest.scenario, g=manifest.g)
    grid = scenario.grid(manifest.cells)
    header = {"t": str(summary["final_time"]), "x_min": str(grid.x_min), "x_max": str(grid.x_max)}
    return Snapshot(header, summary["final_snapshot"])


def cmd_compare(args) -> int:
    if args.files:
        if len(args.files) != 2:
            raise ConfigError("compare takes exactly two snapshot files")
        a, b = (read_snapshot(f) for f in args.files)
        labels = args.files
    else:
        ma = _manifest(args)
        mb = _manifest(args, scheme=args.scheme_b or args.scheme, cells=args.cells_b or args.cells)
        runs = _run_many([ma, mb])
        for s in runs:
            if s["status"] != "ok":
                return _report(s)
        a, b = _as_snapshot(runs[0], ma), _as_snapshot(runs[1], mb)
        labels = [f"{m.scheme}/{a_.data.shape[0]}" for m, a_ in ((ma, a), (mb, b))]
    norms = difference_norms(a, b)
    print(f"compare {labels[0]} vs {labels[1]} (refinement ratio {norms['ratio']})")
    for col in ("h", "u", "h+z"):
        d = norms[col]
        parts = []
        if args.norm in ("l1", "both"):
            parts.append(f"L1={d['l1']:.6e} relL1={d['l1_rel']:.6e}")
        if args.norm in ("linf", "both"):
            parts.append(f"Linf={d['linf']:.6e}")
        print(f"  {col:>4}: " + " ".join(parts))
    return EXIT_OK


def cmd_efficiency(args) -> int:
    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    manifests = [_manifest(args, scheme=s) for s in schemes]
    runs = _run_many(manifests)
    print(f"{'scheme':<10} {'steps':>9} {'mean dt':>14} {'wall [s]':>9}")
    by_scheme = {}
    for s in runs:
        if s["status"] != "ok":
            return _report(s)
        by_scheme[s["scheme"]] = s
        print(f"{s['scheme']:<10} {s['steps']:>9d} {s['mean_dt']:>14.6e} {s['wall_time']:>9.2f}")
    if "imex-loc" in by_scheme and "exex-loc" in by_scheme:
        ratio = by_scheme["imex-loc"]["mean_dt"] / by_scheme["exex-loc"]["mean_dt"]
        print(f"{'ratio':<10} imex-loc/exex-loc mean dt = {ratio:.4f}")
    return EXIT_OK


def cmd_list(args) -> int:
    for name in list_scenarios():
        sc = build_scenario(name)
        print(f"{name:<28} [{sc.x_min:g}, {sc.x_max:g}] {sc.n_cells:>5d} cells  g={sc.g:g}  T={sc.t_end:g}  "
              f"cfl={sc.cfl_factor:g}  bc={sc.bc.describe()}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swlp", description="1D shallow-water Lagrange-Projection solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario and write snapshots")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("audit", help="run with property audits and report pass/fail")
    _common(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("compare", help="difference norms between two snapshots or two runs")
    _common(p)
    p.add_argument("files", nargs="*", help="two snapshot files (otherwise two runs are made)")
    p.add_argument("--scheme-b", choices=[v.value for v in Variant])
    p.add_argument("--cells-b", type=int)
    p.add_argument("--norm", choices=["l1", "linf", "both"], default="both")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("efficiency", help="step counts and mean dt per variant")
    _common(p)
    p.add_argument("--schemes", default="exex-loc,imex-loc")
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("list-scenarios", help="print the scenario catalogue")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, AuditUnavailable, NoEquilibriumError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SOLVER_ERRORS as err:
        print(f"solver failure: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
