import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from gakd.bench import (BenchmarkReport, MetricError, PlannerSettings, Scenario, delta_metric, emit_report,
                        generate_scenarios, horizon_sweep, load_report, load_scenarios, pi_metric, psi_metric,
                        report_to_dict, run_scenarios, save_scenarios)
from gakd.cost import traversability_cost
from gakd.dynamics import VehicleState, initial_state
from gakd.ga_planner import Trajectory

from oracles import TABLE_DELTA, TABLE_PI, TABLE_PSI, minmax_psi

FLAT_THETA = [0.0, math.pi / 2, 0.0]


def quick_settings(max_steps=6):
    s = PlannerSettings()
    return PlannerSettings(s.params, s.weights, replace(s.ga, max_steps=max_steps, generations=5),
                           replace(s.mppi, max_steps=max_steps))


def traj_from(points, goal):
    return Trajectory([VehicleState(p, FLAT_THETA) for p in points], goal=np.asarray(goal, float))


def test_delta_metric():
    assert delta_metric(np.array([[0, 0, 0], [1, 0, 0], [3, 0, 0]], float)) == 0
    assert delta_metric(np.array([[0, 0, 0], [3, 0, 0], [3, 4, 0]], float)) == pytest.approx(2.0)
    loop = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 0, 0]], float)
    assert delta_metric(loop) == pytest.approx(2 + math.sqrt(2))
    with pytest.raises(MetricError):
        delta_metric(np.zeros((1, 3)))


def test_pi_metric(flat_world, small_terrain_world):
    t = traj_from([[0, 0, 0], [1, 0, 0], [2, 1, 0]], [4, 2, 0])
    assert pi_metric(t, flat_world) == 0
    # target 1 m above the plane: Σ = 1 and Λ = 0 on every transition
    t = traj_from([[0, 0, 0], [1, 0, 0], [2, 0, 0], [2, 2, 0]], [0, 0, 1])
    assert pi_metric(t, flat_world) == pytest.approx(0.5)
    w = small_terrain_world
    pts = [initial_state(w, [x, 0.3 * x, 0.0]).p for x in (-1.0, 0.0, 1.2, 2.0)]
    goal = np.array([3.0, 1.0, 0.4])
    t = traj_from(pts, goal)
    hand = [traversability_cost(w.face_at(a).normal, w.face_at(b).normal, b, goal) for a, b in zip(pts, pts[1:])]
    assert pi_metric(t, w) == pytest.approx(sum(hand) / 3)
    with pytest.raises(MetricError):
        pi_metric(traj_from(pts[:1], goal), w)


def test_psi_reproduces_table_cells():
    for planner in TABLE_PI:
        got = psi_metric(TABLE_PI[planner], TABLE_DELTA[planner], 0.5)
        np.testing.assert_allclose(got, minmax_psi(TABLE_PI[planner], TABLE_DELTA[planner], 0.5), atol=1e-15)
        np.testing.assert_allclose(got, TABLE_PSI[planner], atol=5e-4)
    got = psi_metric(TABLE_PI["gakd"], TABLE_DELTA["gakd"], 0.5)
    assert got[0] == pytest.approx(0.4097, abs=5e-5) and got[3] == pytest.approx(0.7738, abs=5e-5)
    assert got[2] == 0


def test_psi_edge_cases():
    np.testing.assert_allclose(psi_metric([1, 2, 3], [9, 9, 9], 1.0), [0, 0.5, 1])
    np.testing.assert_allclose(psi_metric([1, 2, 3], [3, 1, 2], 0.0), [1, 0, 0.5])
    with pytest.raises(ValueError):
        psi_metric([1, 2], [1, 2], 1.5)
    with pytest.raises(MetricError):
        psi_metric([1], [1])


def test_run_scenarios_shape_and_determinism(small_terrain_world):
    scs = generate_scenarios(small_terrain_world, 2, seed=1, min_distance=2, max_distance=5, margin=1)
    a = run_scenarios(small_terrain_world, scs, trials=2, horizon=4, seed=3, settings=quick_settings())
    b = run_scenarios(small_terrain_world, scs, trials=2, horizon=4, seed=3, settings=quick_settings())
    assert len(a.trials) == 2 * 3 * 2
    assert report_to_dict(a, include_timing=False) == report_to_dict(b, include_timing=False)
    assert len({t.seed for t in a.trials}) == 12
    assert a.rollout_counts["gakd"]["total"] > a.rollout_counts["mppi"]["total"]


def test_parallel_matches_serial(small_terrain_world):
    scs = generate_scenarios(small_terrain_world, 2, seed=1, min_distance=2, max_distance=5, margin=1)
    a = run_scenarios(small_terrain_world, scs, trials=1, horizon=4, seed=3, settings=quick_settings())
    b = run_scenarios(small_terrain_world, scs, trials=1, horizon=4, seed=3, settings=quick_settings(), workers=2)
    assert report_to_dict(a, include_timing=False) == report_to_dict(b, include_timing=False)


def test_failing_cell_is_flagged(small_terrain_world):
    good = generate_scenarios(small_terrain_world, 2, seed=1, min_distance=2, max_distance=5, margin=1)
    bad = Scenario("off", good[0].start, (500.0, 0.0, 0.0))
    rep = run_scenarios(small_terrain_world, good + [bad], planners=("gakd",), trials=1, horizon=3,
                        settings=quick_settings())
    flagged = [t for t in rep.trials if t.scenario_id == "off"]
    assert flagged and all(t.error and "OutOfBounds" in t.error for t in flagged)
    cell = rep.averages["gakd"]["scenarios"]["off"]
    assert cell["pi_metric"] is None and cell["failures"] == 1
    ok = [rep.averages["gakd"]["scenarios"][s.id]["pi_metric"] for s in good]
    assert rep.averages["gakd"]["mean_pi_metric"] == pytest.approx(np.mean(ok))


def test_horizon_sweep(small_terrain_world):
    scs = generate_scenarios(small_terrain_world, 2, seed=1, min_distance=2, max_distance=5, margin=1)
    rep = horizon_sweep(small_terrain_world, scs, planners=("gakd", "mppi"), horizons=(5, 7, 10, 12, 15),
                        settings=quick_settings(3))
    for p in ("gakd", "mppi"):
        s = rep.horizon_series[p]
        assert len(s["mean_pi_metric"]) == 5
        assert s["std_across_horizons"] == pytest.approx(np.std(s["mean_pi_metric"]))
    single = horizon_sweep(small_terrain_world, scs, planners=("gakd",), horizons=(4,), seed=2,
                           settings=quick_settings(3))
    plain = run_scenarios(small_terrain_world, scs, planners=("gakd",), trials=1, horizon=4, seed=2,
                          settings=quick_settings(3))
    assert single.averages["gakd"]["mean_pi_metric"] == plain.averages["gakd"]["mean_pi_metric"]


def test_emit_and_reload(tmp_path, small_terrain_world):
    emit_report(BenchmarkReport(), "csv", tmp_path / "empty.csv")
    with open(tmp_path / "empty.csv") as fh:
        assert len(list(csv.reader(fh))) == 1
    emit_report(BenchmarkReport(), "json", tmp_path / "empty.json")
    assert load_report(tmp_path / "empty.json").trials == []

    scs = generate_scenarios(small_terrain_world, 2, seed=1, min_distance=2, max_distance=5, margin=1)
    rep = run_scenarios(small_terrain_world, scs, trials=2, horizon=3, settings=quick_settings(3))
    emit_report(rep, "csv", tmp_path / "r.csv")
    with open(tmp_path / "r.csv") as fh:
        assert len(list(csv.DictReader(fh))) == len(rep.trials)
    emit_report(rep, "json", tmp_path / "r.json")
    back = load_report(tmp_path / "r.json")
    assert back.averages == json.loads(json.dumps(report_to_dict(rep)))["averages"]
    assert len(back.trials) == len(rep.trials)


def test_scenario_files(tmp_path, small_terrain_world):
    scs = generate_scenarios(small_terrain_world, 3, seed=4, min_distance=2, max_distance=5, margin=1)
    for s in scs:
        assert 2 <= s.straight_line_distance <= 5
    save_scenarios(scs, tmp_path / "s.json")
    assert load_scenarios(tmp_path / "s.json") == scs
    (tmp_path / "bad.json").write_text('{"id": 1}')
    with pytest.raises(ValueError):
        load_scenarios(tmp_path / "bad.json")
