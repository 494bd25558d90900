"""Command-line entry points: gen-terrain, gen-scenarios, plan, benchmark, tradeoff.

Exit codes: 0 success, 2 usage error, 3 goal not reached, 4 start or goal off the mesh.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from .baselines import MPPIConfig
from .bench import (PLANNERS, PlannerSettings, emit_report, generate_scenarios, horizon_sweep,
                    load_report, load_scenarios, psi_metric, run_planner, run_scenarios,
                    save_scenarios)
from .cost import CostWeights
from .dynamics import VehicleParams
from .ga_planner import GAConfig, Trajectory
from .mesh import MeshError, generate_terrain, load_ply, save_ply
from .spatial_index import CapacityError, OutOfBoundsError
from .world import World

EXIT_OK, EXIT_USAGE, EXIT_NOT_REACHED, EXIT_OFF_MESH = 0, 2, 3, 4

TRAJECTORY_FIELDS = ("step", "t", "x", "y", "z", "yaw", "pitch", "roll", "vx", "vy", "vz",
                     "a", "delta", "cost_total", "cost_pi")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class VoxelOptions:
    voxel_size: float | None = None
    padding: float | None = None


@dataclass
class RunConfig:
    mesh: str | None = None
    planner: str = "gakd"
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    cost: CostWeights = field(default_factory=CostWeights)
    ga: GAConfig = field(default_factory=GAConfig)
    mppi: MPPIConfig = field(default_factory=MPPIConfig)
    voxel: VoxelOptions = field(default_factory=VoxelOptions)
    seed: int = 0
    out: str | None = None

    def settings(self) -> PlannerSettings:
        return PlannerSettings(self.vehicle, self.cost, self.ga, self.mppi)


_SECTIONS = {"vehicle": VehicleParams, "cost": CostWeights, "ga": GAConfig, "mppi": MPPIConfig,
             "voxel": VoxelOptions}
_SCALARS = ("mesh", "planner", "seed", "out")


def _section(cls, values: dict, name: str):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"config section {name!r}: unknown keys {sorted(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"config section {name!r}: {exc}") from None


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Resolve a RunConfig: defaults, then the JSON file at ``path``, then ``overrides``.

    ``overrides`` uses the file layout: top-level scalars plus per-section dicts.
    """
    data: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
    unknown = set(data) - set(_SECTIONS) - set(_SCALARS)
    if unknown:
        raise UsageError(f"unknown config keys {sorted(unknown)}")
    overrides = overrides or {}
    kw = {}
    for name, cls in _SECTIONS.items():
        merged = dict(data.get(name, {}))
        merged.update({k: v for k, v in overrides.get(name, {}).items() if v is not None})
        kw[name] = _section(cls, merged, name)
    for name in _SCALARS:
        if overrides.get(name) is not None:
            kw[name] = overrides[name]
        elif name in data:
            kw[name] = data[name]
    cfg = RunConfig(**kw)
    if cfg.planner not in PLANNERS:
        raise UsageError(f"unknown planner {cfg.planner!r}; expected one of {', '.join(PLANNERS)}")
    return cfg


def _triple(text: str) -> tuple[float, float, float]:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}")
    return vals


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("horizons must be positive integers")
    return vals


def _planner_list(text: str) -> list[str]:
    names = [x.strip() for x in text.split(",") if x.strip()]
    bad = [n for n in names if n not in PLANNERS]
    if not names or bad:
        raise argparse.ArgumentTypeError(f"planners must come from {', '.join(PLANNERS)}")
    return names


def _weight(text: str) -> float:
    w = float(text)
    if not 0.0 <= w <= 1.0:
        raise argparse.ArgumentTypeError("w must lie in [0, 1]")
    return w


def _world(cfg: RunConfig) -> World:
    if cfg.mesh is None:
        raise UsageError("a mesh is required (--mesh or \"mesh\" in the config file)")
    try:
        mesh = load_ply(cfg.mesh)
    except (OSError, MeshError) as exc:
        raise UsageError(f"cannot load mesh {cfg.mesh}: {exc}") from None
    try:
        return World.build(mesh, cfg.voxel.voxel_size, cfg.voxel.padding)
    except (CapacityError, ValueError) as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------- commands

def cmd_gen_terrain(args) -> int:
    mesh = generate_terrain(args.seed, args.nx, args.ny, args.cell, args.amplitude, args.octaves)
    save_ply(mesh, args.out, binary=args.binary)
    print(f"wrote {mesh.n_faces} faces to {args.out}")
    return EXIT_OK


def cmd_gen_scenarios(args) -> int:
    cfg = load_config(args.config, {"mesh": args.mesh})
    world = _world(cfg)
    try:
        scenarios = generate_scenarios(world, args.n, args.seed, args.min_distance, args.max_distance,
                                       args.margin)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_scenarios(scenarios, args.out)
    return EXIT_OK


def trajectory_rows(traj: Trajectory, dt: float) -> list[dict]:
    """Row k holds state k and, except on the last row, the control applied there and its cost."""
    rows = []
    for k, s in enumerate(traj.states):
        row = {"step": k, "t": k * dt, "x": s.p[0], "y": s.p[1], "z": s.p[2],
               "yaw": s.theta[0], "pitch": s.theta[1], "roll": s.theta[2],
               "vx": s.v[0], "vy": s.v[1], "vz": s.v[2],
               "a": "", "delta": "", "cost_total": "", "cost_pi": ""}
        if k < len(traj.applied_controls):
            c = traj.per_step_costs[k]
            row.update(a=traj.applied_controls[k][0], delta=traj.applied_controls[k][1],
                       cost_total=c.total, cost_pi=c.traversability_term)
        rows.append({key: float(v) if isinstance(v, np.floating) else v for key, v in row.items()})
    return rows


def write_trajectory(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRAJECTORY_FIELDS)
        writer.writeheader()
        writer.writerows(rows)


def cmd_plan(args) -> int:
    overrides = {"mesh": args.mesh, "planner": args.planner, "seed": args.seed, "out": args.out,
                 "ga": {"horizon": args.horizon, "max_steps": args.max_steps},
                 "mppi": {"horizon": args.horizon, "max_steps": args.max_steps}}
    cfg = load_config(args.config, overrides)
    world = _world(cfg)
    horizon = cfg.ga.horizon if cfg.planner == "gakd" else cfg.mppi.horizon
    try:
        traj = run_planner(cfg.planner, args.start, args.goal, world, horizon, cfg.seed, cfg.settings())
    except OutOfBoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OFF_MESH
    if cfg.out is not None:
        write_trajectory(cfg.out, trajectory_rows(traj, cfg.vehicle.dt))
    status = "reached" if traj.reached_goal else ("left terrain" if traj.left_terrain else "not reached")
    print(f"{cfg.planner}: {status} after {len(traj.applied_controls)} steps")
    return EXIT_OK if traj.reached_goal else EXIT_NOT_REACHED


def cmd_benchmark(args) -> int:
    overrides = {"mesh": args.mesh, "seed": args.seed, "out": args.out,
                 "ga": {"max_steps": args.max_steps}, "mppi": {"max_steps": args.max_steps}}
    cfg = load_config(args.config, overrides)
    try:
        scenarios = load_scenarios(args.scenarios)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read scenarios {args.scenarios}: {exc}") from None
    if not scenarios:
        raise UsageError("scenario file is empty")
    world = _world(cfg)
    workers = args.threads or os.cpu_count() or 1
    if args.horizons:
        report = horizon_sweep(world, scenarios, args.planners, tuple(args.horizons), args.trials,
                               cfg.seed, cfg.settings(), workers)
    else:
        report = run_scenarios(world, scenarios, args.planners, args.trials, args.horizon, cfg.seed,
                               cfg.settings(), workers)
    if cfg.out is None:
        raise UsageError("--out is required")
    fmt = "csv" if str(cfg.out).endswith(".csv") else "json"
    emit_report(report, fmt, cfg.out, include_timing=not args.omit_timing)
    for planner in args.planners:
        if args.horizons:
            s = report.horizon_series[planner]
            print(planner, "mean Π per horizon", s["mean_pi_metric"], "std", s["std_across_horizons"])
        else:
            a = report.averages[planner]
            print(planner, "mean Π", a["mean_pi_metric"], "mean Δ", a["mean_delta_metric"])
    return EXIT_OK


def _read_table(path) -> list[dict]:
    """Hand-supplied metric table: CSV with columns planner, scenario_id, pi_metric, delta_metric."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    need = {"planner", "scenario_id", "pi_metric", "delta_metric"}
    if not rows or not need <= set(rows[0]):
        raise UsageError(f"table needs columns {sorted(need)}")
    return [{"horizon": r.get("horizon") or "", "planner": r["planner"], "scenario_id": r["scenario_id"],
             "pi_metric": float(r["pi_metric"]), "delta_metric": float(r["delta_metric"])} for r in rows]


def _report_table(path) -> list[dict]:
    report = load_report(path)
    cells: dict = {}
    for t in report.trials:
        if t.error is None and t.pi_metric is not None:
            cells.setdefault((t.horizon, t.planner, t.scenario_id), []).append(t)
    several = len({k[0] for k in cells}) > 1
    return [{"horizon": h if several else "", "planner": p, "scenario_id": sid,
             "pi_metric": float(np.mean([t.pi_metric for t in ts])),
             "delta_metric": float(np.mean([t.delta_metric for t in ts]))}
            for (h, p, sid), ts in cells.items()]


def tradeoff_rows(table: list[dict], w: float) -> list[dict]:
    groups: dict = {}
    for r in table:
        groups.setdefault((r["horizon"], r["planner"]), []).append(r)
    out = []
    for (h, planner), rows in groups.items():
        psi = psi_metric([r["pi_metric"] for r in rows], [r["delta_metric"] for r in rows], w)
        for r, v in zip(rows, psi):
            out.append(dict(r, psi=float(v)))
        out.append({"horizon": h, "planner": planner, "scenario_id": "mean",
                    "pi_metric": float(np.mean([r["pi_metric"] for r in rows])),
                    "delta_metric": float(np.mean([r["delta_metric"] for r in rows])),
                    "psi": float(psi.mean())})
    return out


def cmd_tradeoff(args) -> int:
    try:
        table = _read_table(args.table) if args.table else _report_table(args.report)
    except OSError as exc:
        raise UsageError(str(exc)) from None
    try:
        rows = tradeoff_rows(table, args.w)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    names = ["planner", "scenario_id", "pi_metric", "delta_metric", "psi"]
    if any(r["horizon"] != "" for r in rows):
        names = ["horizon"] + names
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=names, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    for r in rows:
        if r["scenario_id"] == "mean":
            print(r["planner"], (f"H={r['horizon']} " if r["horizon"] != "" else "") + f"mean Ψ {r['psi']:.4f}")
    return EXIT_OK


# ------------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gakd", description="Genetic kinodynamic planning on triangle meshes")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-terrain", help="write a seeded value-noise terrain mesh")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--nx", type=int, default=64)
    g.add_argument("--ny", type=int, default=64)
    g.add_argument("--cell", type=float, default=0.5)
    g.add_argument("--amplitude", type=float, default=2.0)
    g.add_argument("--octaves", type=int, default=4)
    g.add_argument("--binary", action="store_true", help="binary little-endian PLY")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_terrain)

    s = sub.add_parser("gen-scenarios", help="random start/goal pairs on a mesh")
    s.add_argument("--mesh")
    s.add_argument("--config")
    s.add_argument("--n", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--min-distance", type=float, default=8.0)
    s.add_argument("--max-distance", type=float, default=14.0)
    s.add_argument("--margin", type=float, default=3.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_scenarios)

    p = sub.add_parser("plan", help="plan one start/goal pair")
    p.add_argument("--mesh")
    # negative coordinates need the --start=x,y,z spelling
    p.add_argument("--start", type=_triple, required=True, metavar="X,Y,Z")
    p.add_argument("--goal", type=_triple, required=True, metavar="X,Y,Z")
    p.add_argument("--planner", choices=PLANNERS)
    p.add_argument("--horizon", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    b = sub.add_parser("benchmark", help="run planners over a scenario file")
    b.add_argument("--mesh")
    b.add_argument("--scenarios", required=True)
    b.add_argument("--planners", type=_planner_list, default=list(PLANNERS))
    b.add_argument("--trials", type=int, default=5)
    b.add_argument("--horizon", type=int, default=10)
    b.add_argument("--horizons", type=_int_list, help="comma-separated horizons for a sweep")
    b.add_argument("--max-steps", type=int)
    b.add_argument("--seed", type=int)
    b.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    b.add_argument("--omit-timing", action="store_true", help="leave wall-clock fields out of the report")
    b.add_argument("--config")
    b.add_argument("--out")
    b.set_defaults(func=cmd_benchmark)

    t = sub.add_parser("tradeoff", help="Ψ table from a report or a Π/Δ table")
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--report")
    src.add_argument("--table", help="CSV with planner,scenario_id,pi_metric,delta_metric")
    t.add_argument("--w", type=_weight, default=0.5)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_tradeoff)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    if getattr(args, "trials", 1) < 1 or (getattr(args, "threads", None) or 1) < 1:
        parser.error("--trials and --threads must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
