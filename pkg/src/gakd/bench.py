"""Scenario runs, path metrics, horizon sweeps and report files."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .baselines import MPPIConfig, plan_with
from .cost import CostWeights, traversability_cost
from .dynamics import VehicleParams, project_onto_face
from .ga_planner import GAConfig, Trajectory, plan
from .mesh import generate_terrain
from .world import World

PLANNERS = ("gakd", "mppi", "log-mppi")
# fixed ids keep per-cell seeds stable when the planner list changes
_PLANNER_KEYS = {"gakd": 0, "mppi": 1, "log-mppi": 2}


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    id: str
    start: tuple[float, float, float]
    goal: tuple[float, float, float]

    @property
    def straight_line_distance(self) -> float:
        return float(np.linalg.norm(np.subtract(self.goal, self.start)))


@dataclass
class PlannerSettings:
    params: VehicleParams = field(default_factory=VehicleParams)
    weights: CostWeights = field(default_factory=CostWeights)
    ga: GAConfig = field(default_factory=GAConfig)
    mppi: MPPIConfig = field(default_factory=MPPIConfig)

    def snapshot(self) -> dict:
        return {"vehicle": asdict(self.params), "cost": asdict(self.weights),
                "ga": asdict(self.ga), "mppi": asdict(self.mppi)}


@dataclass
class TrialReport:
    scenario_id: str
    planner: str
    seed: int
    horizon: int
    trial: int
    pi_metric: float | None = None
    delta_metric: float | None = None
    computation_time: float = 0.0
    reached_goal: bool = False
    steps: int = 0
    rollouts: int = 0
    error: str | None = None
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class BenchmarkReport:
    trials: list[TrialReport] = field(default_factory=list)
    averages: dict = field(default_factory=dict)
    tradeoff: dict = field(default_factory=dict)
    rollout_counts: dict = field(default_factory=dict)
    horizon_series: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)


# ---------------------------------------------------------------------- metrics

def pi_metric(trajectory: Trajectory, world: World) -> float:
    """Mean traversability cost per transition, recomputed from the stored states."""
    states = trajectory.states
    if len(states) < 2:
        raise MetricError("traversability metric needs at least one transition")
    goal = trajectory.goal
    total = 0.0
    for a, b in zip(states[:-1], states[1:]):
        total += traversability_cost(world.face_at(a.p).normal, world.face_at(b.p).normal, b.p, goal)
    return total / (len(states) - 1)


def delta_metric(trajectory) -> float:
    """Path length minus the straight-line distance between the first and last positions."""
    pts = trajectory.positions if isinstance(trajectory, Trajectory) else np.asarray(trajectory, dtype=float)
    if len(pts) < 2:
        raise MetricError("path-length metric needs at least one transition")
    length = float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())
    return length - float(np.linalg.norm(pts[-1] - pts[0]))


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def psi_metric(pi_values, delta_values, w: float = 0.5) -> np.ndarray:
    """Trade-off score per scenario from one planner's Π and Δ columns (min-max normalized)."""
    pi_values = np.asarray(pi_values, dtype=np.float64)
    delta_values = np.asarray(delta_values, dtype=np.float64)
    if pi_values.shape != delta_values.shape:
        raise MetricError("Π and Δ columns must have the same length")
    if len(pi_values) < 2:
        raise MetricError("min-max normalization needs at least two scenarios")
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must be in [0, 1]")
    return w * _minmax(pi_values) + (1.0 - w) * _minmax(delta_values)


# ------------------------------------------------------------------- execution

def cell_seed(master_seed: int, scenario_index: int, planner: str, trial: int, horizon: int) -> int:
    ss = np.random.SeedSequence([master_seed, scenario_index, _PLANNER_KEYS[planner], trial, horizon])
    return int(ss.generate_state(1)[0])


def run_planner(name: str, start, goal, world: World, horizon: int, seed: int,
                settings: PlannerSettings) -> Trajectory:
    if name == "gakd":
        cfg = replace(settings.ga, horizon=horizon, seed=seed)
        return plan(start, goal, world, cfg, settings.params, settings.weights)
    if name in ("mppi", "log-mppi"):
        variant = "gaussian" if name == "mppi" else "log_normal_mixture"
        cfg = replace(settings.mppi, horizon=horizon, seed=seed, variant=variant)
        return plan_with(name, start, goal, world, cfg, settings.params, settings.weights)
    raise ValueError(f"unknown planner {name!r}; expected one of {PLANNERS}")


def _run_cell(args) -> TrialReport:
    world, sc, planner, seed, horizon, trial, settings = args
    rep = TrialReport(sc.id, planner, seed, horizon, trial)
    try:
        traj = run_planner(planner, sc.start, sc.goal, world, horizon, seed, settings)
        rep.trajectory = traj
        rep.computation_time = traj.compute_time
        rep.reached_goal = traj.reached_goal
        rep.steps = len(traj.applied_controls)
        rep.rollouts = traj.rollouts
        rep.pi_metric = pi_metric(traj, world)
        rep.delta_metric = delta_metric(traj)
    except Exception as exc:  # a failing cell is recorded, the run continues
        rep.error = f"{type(exc).__name__}: {exc}"
    return rep


def summarize(trials: list[TrialReport], w: float = 0.5) -> tuple[dict, dict, dict]:
    """Per-planner, per-scenario means over successful trials, plus Ψ table and rollout counts."""
    averages: dict = {}
    rollouts: dict = {}
    for planner in dict.fromkeys(t.planner for t in trials):
        mine = [t for t in trials if t.planner == planner]
        per_sc = {}
        for sid in dict.fromkeys(t.scenario_id for t in mine):
            cell = [t for t in mine if t.scenario_id == sid]
            good = [t for t in cell if t.ok]
            per_sc[sid] = {
                "pi_metric": float(np.mean([t.pi_metric for t in good])) if good else None,
                "delta_metric": float(np.mean([t.delta_metric for t in good])) if good else None,
                "computation_time": float(np.mean([t.computation_time for t in good])) if good else None,
                "reached_goal_rate": float(np.mean([t.reached_goal for t in good])) if good else None,
                "successes": len(good),
                "failures": len(cell) - len(good),
            }
        pis = [v["pi_metric"] for v in per_sc.values() if v["pi_metric"] is not None]
        dels = [v["delta_metric"] for v in per_sc.values() if v["delta_metric"] is not None]
        averages[planner] = {
            "scenarios": per_sc,
            "mean_pi_metric": float(np.mean(pis)) if pis else None,
            "mean_delta_metric": float(np.mean(dels)) if dels else None,
        }
        good = [t for t in mine if t.ok and t.steps > 0]
        rollouts[planner] = {
            "total": int(sum(t.rollouts for t in mine)),
            "per_decision": float(sum(t.rollouts for t in good) / max(1, sum(t.steps for t in good))),
        }
    tradeoff = {}
    for planner, avg in averages.items():
        cells = {sid: v for sid, v in avg["scenarios"].items() if v["pi_metric"] is not None}
        if len(cells) >= 2:
            psi = psi_metric([v["pi_metric"] for v in cells.values()],
                             [v["delta_metric"] for v in cells.values()], w)
            tradeoff[planner] = {"w": w, "scenarios": dict(zip(cells, psi.tolist())),
                                 "mean": float(psi.mean())}
    return averages, tradeoff, rollouts


def run_scenarios(world: World, scenarios: list[Scenario], planners=PLANNERS, trials: int = 5,
                  horizon: int = 10, seed: int = 0, settings: PlannerSettings | None = None,
                  workers: int = 1) -> BenchmarkReport:
    """Run every (scenario, planner, trial) cell with derived seeds."""
    settings = settings or PlannerSettings()
    for p in planners:
        if p not in _PLANNER_KEYS:
            raise ValueError(f"unknown planner {p!r}")
    jobs = [(world, sc, p, cell_seed(seed, i, p, t, horizon), horizon, t, settings)
            for i, sc in enumerate(scenarios) for p in planners for t in range(trials)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    averages, tradeoff, rollouts = summarize(results)
    config = {"seed": seed, "trials": trials, "horizon": horizon, "planners": list(planners),
              "scenarios": [asdict(s) for s in scenarios], **settings.snapshot()}
    return BenchmarkReport(results, averages, tradeoff, rollouts, {}, config)


def horizon_sweep(world: World, scenarios: list[Scenario], planners=PLANNERS,
                  horizons=(5, 7, 10, 12, 15), trials: int = 1, seed: int = 0,
                  settings: PlannerSettings | None = None, workers: int = 1) -> BenchmarkReport:
    """Repeat :func:`run_scenarios` per horizon; ``horizon_series`` holds mean Π per horizon."""
    combined = BenchmarkReport()
    series = {p: {"horizons": list(horizons), "mean_pi_metric": []} for p in planners}
    for h in horizons:
        rep = run_scenarios(world, scenarios, planners, trials, h, seed, settings, workers)
        combined.trials.extend(rep.trials)
        for p in planners:
            series[p]["mean_pi_metric"].append(rep.averages[p]["mean_pi_metric"])
        combined.averages[str(h)] = rep.averages
        combined.tradeoff[str(h)] = rep.tradeoff
        combined.rollout_counts[str(h)] = rep.rollout_counts
        combined.config = dict(rep.config, horizons=list(horizons))
    for p in planners:
        vals = [v for v in series[p]["mean_pi_metric"] if v is not None]
        series[p]["std_across_horizons"] = float(np.std(vals)) if vals else None
    combined.horizon_series = series
    if len(horizons) == 1:
        only = str(horizons[0])
        combined.averages = combined.averages[only]
        combined.tradeoff = combined.tradeoff[only]
        combined.rollout_counts = combined.rollout_counts[only]
    return combined


# ---------------------------------------------------------------------- reports

TIMING_FIELDS = ("computation_time",)
CSV_FIELDS = ("scenario_id", "planner", "seed", "horizon", "trial", "pi_metric", "delta_metric",
              "computation_time", "reached_goal", "steps", "rollouts", "error")


def _sig(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, (float, np.floating)):
        return float(f"{float(x):.6g}") if math.isfinite(x) else None
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, dict):
        return {str(k): _sig(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_sig(v) for v in x]
    if isinstance(x, np.ndarray):
        return _sig(x.tolist())
    return x


def trial_record(t: TrialReport, include_path: bool = True) -> dict:
    rec = {k: getattr(t, k) for k in CSV_FIELDS}
    if include_path and t.trajectory is not None:
        rec["path"] = t.trajectory.positions.tolist()
    return rec


def report_to_dict(report: BenchmarkReport, include_timing: bool = True) -> dict:
    trials = [trial_record(t) for t in report.trials]
    out = {"trials": trials, "averages": report.averages, "tradeoff": report.tradeoff,
           "rollout_counts": report.rollout_counts, "horizon_series": report.horizon_series,
           "config": report.config}
    out = _sig(out)
    if not include_timing:
        out = _strip_timing(out)
    return out


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in TIMING_FIELDS}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


def emit_report(report: BenchmarkReport, fmt: str, path, include_timing: bool = True) -> None:
    """Write ``report`` as JSON (full structure) or CSV (one row per trial)."""
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(report_to_dict(report, include_timing), fh, indent=1, sort_keys=True)
            fh.write("\n")
    elif fmt == "csv":
        names = [f for f in CSV_FIELDS if include_timing or f not in TIMING_FIELDS]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=names, extrasaction="ignore")
            writer.writeheader()
            for t in report.trials:
                writer.writerow(_sig(trial_record(t, include_path=False)))
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def load_report(path) -> BenchmarkReport:
    with open(path) as fh:
        data = json.load(fh)
    trials = []
    for rec in data.get("trials", []):
        rec = {k: rec.get(k) for k in CSV_FIELDS if k in rec or k not in TIMING_FIELDS}
        trials.append(TrialReport(**rec))
    return BenchmarkReport(trials, data.get("averages", {}), data.get("tradeoff", {}),
                           data.get("rollout_counts", {}), data.get("horizon_series", {}),
                           data.get("config", {}))


def load_scenarios(path) -> list[Scenario]:
    """Scenario file: JSON array of ``{"id", "start": [x, y, z], "goal": [x, y, z]}``."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise ValueError("scenario file must hold a JSON array")
    out = []
    for i, rec in enumerate(data):
        start, goal = rec["start"], rec["goal"]
        if len(start) != 3 or len(goal) != 3:
            raise ValueError(f"scenario {i}: start and goal need three coordinates")
        out.append(Scenario(str(rec.get("id", i + 1)), tuple(map(float, start)), tuple(map(float, goal))))
    return out


def save_scenarios(scenarios: list[Scenario], path) -> None:
    with open(path, "w") as fh:
        json.dump([{"id": s.id, "start": list(s.start), "goal": list(s.goal)} for s in scenarios], fh, indent=1)
        fh.write("\n")


def generate_scenarios(world: World, n: int = 5, seed: int = 0, min_distance: float = 8.0,
                       max_distance: float = 14.0, margin: float = 3.0) -> list[Scenario]:
    """Random start/goal pairs on the terrain surface, kept ``margin`` metres from the mesh edge."""
    rng = np.random.default_rng(seed)
    lo, hi = world.mesh.aabb
    lo_xy, hi_xy = lo[:2] + margin, hi[:2] - margin
    if np.any(hi_xy <= lo_xy):
        raise ValueError("terrain too small for the requested margin")

    def on_surface(xy):
        probe = np.array([xy[0], xy[1], 0.5 * (lo[2] + hi[2])])
        return project_onto_face(probe, world.face_at(probe))

    out = []
    for _ in range(10_000):
        if len(out) == n:
            break
        a = on_surface(rng.uniform(lo_xy, hi_xy))
        b = on_surface(rng.uniform(lo_xy, hi_xy))
        if min_distance <= np.linalg.norm(a - b) <= max_distance:
            out.append(Scenario(str(len(out) + 1), tuple(a.tolist()), tuple(b.tolist())))
    if len(out) < n:
        raise ValueError("could not place enough scenarios with the requested distances")
    return out


# ------------------------------------------------------------ desk-scale suite

DESK_TERRAIN = dict(seed=7, nx=64, ny=64, cell_size=0.5, amplitude=2.0, octaves=4)
DESK_SCENARIO_SEED = 7
DESK_MASTER_SEED = 1
DESK_MAX_STEPS = 300


def desk_setup(max_steps: int = DESK_MAX_STEPS) -> tuple[World, list[Scenario], PlannerSettings]:
    """The generated terrain, five scenarios and settings used by the reference experiments."""
    world = World.build(generate_terrain(**DESK_TERRAIN))
    scenarios = generate_scenarios(world, 5, seed=DESK_SCENARIO_SEED)
    base = PlannerSettings()
    settings = PlannerSettings(base.params, base.weights, replace(base.ga, max_steps=max_steps),
                               replace(base.mppi, max_steps=max_steps))
    return world, scenarios, settings
