import math

import numpy as np
import pytest

from gakd.cost import (CostWeights, distance_cost, orthogonality_penalty, rollout_batch, rollout_cost,
                       rollout_states, slope_penalty, transition_cost, traversability_cost)
from gakd.dynamics import VehicleParams, VehicleState, initial_state

FLAT_THETA = [0.0, math.pi / 2, 0.0]
UP = np.array([0.0, 0.0, 1.0])


def test_distance_cost():
    assert distance_cost([1, 2, 3], [1, 2, 3]) == 0
    assert distance_cost([0, 0, 0], [3, 4, 0]) == 5
    assert distance_cost([1, 1, 1], [2, 2, 2]) == pytest.approx(math.sqrt(3))


def test_slope_penalty():
    assert slope_penalty(UP, [1, 2, 0]) == 0
    assert slope_penalty(UP, [0, 0, -5]) == 5
    assert slope_penalty(UP, [3, 0, 4]) == 4


def test_orthogonality_penalty():
    assert orthogonality_penalty(UP, UP) == 0
    assert orthogonality_penalty(UP, [1, 0, 0]) == 1
    n60 = [math.sin(math.pi / 3), 0, math.cos(math.pi / 3)]
    assert orthogonality_penalty(UP, n60) == pytest.approx(0.5)


def test_traversability_cost():
    assert traversability_cost(UP, UP, [1, 1, 0], [3, 0, 0]) == 0
    assert traversability_cost(UP, UP, [0, 0, 0], [0, 0, 5]) == 2.5
    assert traversability_cost(UP, [1, 0, 0], [0, 0, 0], [3, 0, 0]) == 0.5


def test_transition_cost_examples(flat_world):
    a = VehicleState([0, 0, 0], FLAT_THETA)
    b = VehicleState([2, 0, 0], FLAT_THETA)
    c = transition_cost(a, b, [0, 0, 0], flat_world, CostWeights())
    assert c.total == 2.0 and c.traversability_term == 0
    c = transition_cost(a, a, [0, 0, 0], flat_world, CostWeights())
    assert c.total == 0
    # the target sits 1 m above the plane: Σ = 1, so Π = 0.5 and Δ = |(2,0,-1)|
    c = transition_cost(a, b, [0, 0, 1], flat_world, CostWeights(alpha1=0.0, alpha2=1.0))
    assert c.total == pytest.approx(0.5) and c.distance_term == pytest.approx(math.sqrt(5))
    c = transition_cost(a, b, [0, 0, 1], flat_world, CostWeights())
    assert c.total == pytest.approx(math.sqrt(5) + 0.5)


def test_weights_validation():
    with pytest.raises(ValueError):
        CostWeights(alpha1=-1)
    with pytest.raises(ValueError):
        CostWeights(alpha1=0, alpha2=0)


def test_rollout_cost_trivial(flat_world):
    st = VehicleState([0, 0, 0], FLAT_THETA)
    params = VehicleParams(friction_mu=0.0, gravity=0.0)
    assert rollout_cost(st, np.zeros((0, 2)), [0, 0, 0], flat_world, CostWeights(), params) == 0
    assert rollout_cost(st, np.zeros((5, 2)), [0, 0, 0], flat_world, CostWeights(), params) == 0


def test_rollout_cost_matches_hand_sum(flat_world, small_terrain_world):
    controls = np.array([[1.0, 0.2], [2.0, -0.3], [-0.5, 0.6]])
    for world, params in ((flat_world, VehicleParams(friction_mu=0.0, gravity=0.0)),
                          (small_terrain_world, VehicleParams())):
        st = initial_state(world, [0.2, -0.4, 0.0], yaw=0.4)
        st = VehicleState(st.p, st.theta, [0.8, 0.3, 0.0])
        target = np.array([2.0, 1.0, 0.3])
        states = rollout_states(st, controls, world, params)
        assert len(states) == 4
        hand = sum(transition_cost(a, b, target, world, CostWeights()).total
                   for a, b in zip(states[:-1], states[1:]))
        assert rollout_cost(st, controls, target, world, CostWeights(), params) == pytest.approx(hand, abs=1e-12)


def test_rollout_additivity(small_terrain_world):
    world, params, w = small_terrain_world, VehicleParams(), CostWeights()
    rng = np.random.default_rng(4)
    controls = np.c_[rng.uniform(-3, 3, 8), rng.uniform(-0.7, 0.7, 8)]
    st = initial_state(world, [0.0, 0.0, 0.0])
    target = [3.0, 3.0, 0.0]
    mid = rollout_states(st, controls[:3], world, params)[-1]
    whole = rollout_cost(st, controls, target, world, w, params)
    split = rollout_cost(st, controls[:3], target, world, w, params) + \
        rollout_cost(mid, controls[3:], target, world, w, params)
    assert whole == pytest.approx(split, abs=1e-12)


def test_off_mesh_penalty(flat_world):
    st = VehicleState([4.9, 0, 0], FLAT_THETA, [5000.0, 0, 0])
    costs, off = rollout_batch(st, np.zeros((2, 3, 2)), [0, 0, 0], flat_world, CostWeights(off_mesh_penalty=7.0),
                               VehicleParams())
    assert off.all() and (costs == 7.0).all()


def test_monotone_in_alpha2(small_terrain_world):
    st = initial_state(small_terrain_world, [0.0, 0.0, 0.0])
    controls = np.array([[[2.0, 0.1]] * 6])
    target = [2.0, -2.0, 1.0]
    prev = -1.0
    for a2 in (0.0, 0.5, 1.0, 4.0):
        c, _ = rollout_batch(st, controls, target, small_terrain_world, CostWeights(1.0, a2), VehicleParams())
        assert c[0] >= prev
        prev = c[0]
