"""Command-line entry point: ``drivebrake <subcommand> [options]``.

Exit status: 0 success, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io as dio
from .analysis import equilibria, regime_report
from .config import ConfigError, RunConfig, parse_config
from .experiments import FIGURES, ScenarioTemplate, classify_run, reproduce, sweep, write_sweep_outputs
from .model import Variant
from .ode import IntegrationError, phase_portrait
from .pde import Grid1D, NumericalAbort, run, track_fronts

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value run configuration")
    common.add_argument("--out", type=Path, help="output directory (overrides the config's 'out')")
    common.add_argument("--jobs", type=int, default=None, help="worker processes for sweep (default: all cores)")
    common.add_argument("--full-res", action="store_true", help="use the full-resolution grid N=16000, M=160000")
    common.add_argument("--seed", type=int, default=None, help="seed for random initial conditions")

    ap = argparse.ArgumentParser(prog="drivebrake", description="Drive/brake reaction-diffusion toolkit.")
    sub = ap.add_subparsers(dest="command", required=True)
    an = sub.add_parser("analyze", parents=[common], help="regime report for one parameter triple")
    an.add_argument("--no-certify", action="store_true", help="skip the grid-certified thresholds")
    sub.add_parser("phase", parents=[common], help="integrate and classify well-mixed trajectories")
    sub.add_parser("simulate", parents=[common], help="run the 1-D reaction-diffusion solver")
    sub.add_parser("sweep", parents=[common], help="classify outcomes over an (a, b) grid")
    rp = sub.add_parser("reproduce", parents=[common], help="run a canonical figure scenario")
    rp.add_argument("figure_id", choices=sorted(FIGURES))
    return ap


def _load(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config is required for this subcommand")
    cfg = parse_config(args.config)
    return _apply_flags(cfg, args)


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.full_res:
        cfg = replace(cfg, grid=Grid1D.full_res(L=cfg.grid.L, T_end=cfg.grid.T_end))
    return cfg


def cmd_analyze(args) -> int:
    cfg = _load(args)
    rep = regime_report(cfg.params, certify=not args.no_certify)
    text = rep.to_text()
    sys.stdout.write(text)
    dio.atomic_write_text(cfg.out_dir / "report.txt", text)
    dio.atomic_write_text(cfg.out_dir / "report.csv", rep.csv_header() + "\n" + rep.to_csv_row() + "\n")
    return EXIT_OK


def cmd_phase(args) -> int:
    cfg = _load(args)
    ph = cfg.phase
    res = phase_portrait(cfg.params, ph.n_starts, ph.t_end, cfg.seed, equilibria(cfg.params), ph.dt_max, ph.tail_fraction)
    summary = {"a": cfg.params.a, "b": cfg.params.b, "h": cfg.params.h, "seed": cfg.seed,
               "t_end": ph.t_end, "n_starts": ph.n_starts}
    for k, tr in enumerate(res.trajectories):
        dio.write_trajectory(cfg.out_dir / f"traj_{k:02d}.csv", tr)
        summary[f"trajectory_{k:02d}"] = str(tr.classification)
    text = dio.kv_text(summary)
    dio.atomic_write_text(cfg.out_dir / "summary.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    g = cfg.grid
    n0 = np.full(g.nodes, cfg.n0) if cfg.params.variant is Variant.NAGYLAKI else None
    drift = cfg.drift if cfg.drift.profile != "none" else None
    snaps = tuple(t for t in cfg.snapshots if t <= g.T_end)
    res = run(cfg.params, g, cfg.ic, drift, snaps, cfg.raster_dt, n0=n0)
    dio.write_snapshots(cfg.out_dir, res.snapshots, g.x)
    dio.write_raster(cfg.out_dir, res.raster, stride=cfg.raster_stride)
    dio.write_fronts(cfg.out_dir, track_fronts(res.raster, cfg.level_u, cfg.level_v))
    rec = classify_run(res, cfg.thresholds)
    summary = {**rec.summary(), "stiffness_advisory": str(g.stiffness_advisory(cfg.params)).lower()}
    text = dio.kv_text(summary)
    dio.atomic_write_text(cfg.out_dir / "summary.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if not cfg.sweep_a or not cfg.sweep_b:
        raise ConfigError("sweep needs sweep.a and sweep.b lists", args.config)
    tmpl = ScenarioTemplate(
        grid=cfg.grid, h=cfg.params.h, brake_release=_brake_release(cfg),
        thresholds=cfg.thresholds, raster_dt=cfg.raster_dt,
    )
    res = sweep(cfg.sweep_a, cfg.sweep_b, tmpl, jobs=args.jobs)
    write_sweep_outputs(res, cfg.out_dir)
    for r in res.records:
        print(f"a={r.params.a} b={r.params.b} outcome={r.outcome.value}")
    return EXIT_OK


def _brake_release(cfg: RunConfig) -> float:
    rel = [b.release_time for b in cfg.ic.blocks if b.field == "v"]
    return max(rel) if rel else 0.0


def cmd_reproduce(args) -> int:
    grid = None
    out = args.out
    seed = 0 if args.seed is None else args.seed
    if args.config is not None:
        cfg = _apply_flags(parse_config(args.config), args)
        grid = cfg.grid if (cfg.grid_explicit or args.full_res) else None
        out = cfg.out_dir
        seed = cfg.seed
    elif args.full_res:
        grid = Grid1D.full_res()
    out = out or Path("out") / args.figure_id
    rep = reproduce(args.figure_id, out, grid=grid, seed=seed)
    print(f"figure: {args.figure_id}")
    print(f"expected: {rep.expected}")
    print(rep.summary_line())
    print(f"match: {str(rep.ok).lower()}")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "phase": cmd_phase,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "reproduce": cmd_reproduce,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.jobs is not None and args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and args.seed < 0:
        print("config error: --seed must be >= 0", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalAbort, IntegrationError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
