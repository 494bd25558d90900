import math

import numpy as np
import pytest

from gakd.dynamics import (LeftTerrainError, VehicleParams, VehicleState, forward_direction, initial_state,
                           project_onto_face, signed_distance, step, step_batch, surface_angles,
                           tangential_velocity, update_orientation, update_velocity, wrap_angle,
                           yaw_increment)
from gakd.mesh import Face
from gakd.world import World

from conftest import ridge_square

UP = np.array([0.0, 0.0, 1.0])
FLAT = Face(0, UP, np.zeros(3), 0.0)
FLAT_THETA = [0.0, math.pi / 2, 0.0]


def rodrigues(v, n, angle):
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(n, v) * s + n * np.dot(n, v) * (1 - c)


def oracle_step(state, a, delta, world, params):
    """Reference transition assembled from the public vector helpers."""
    f0 = world.face_at(state.p)
    vt = tangential_velocity(state.v, f0.normal)
    speed = float(np.linalg.norm(vt))
    tentative = state.p + vt * params.dt
    f1 = world.face_at(tentative)
    p1 = project_onto_face(tentative, f1)
    v1 = update_velocity(state, a, f0, params)
    dyaw = float(yaw_increment(speed, delta, params))
    if params.steering_model == "heading-coupled":
        v1 = rodrigues(v1, f0.normal, dyaw)
    pitch, roll = surface_angles(f1.normal)
    return VehicleState(p1, [float(wrap_angle(state.yaw + dyaw)), pitch, roll], v1)


def test_tangential_velocity_examples():
    np.testing.assert_allclose(tangential_velocity([1, 0, 0], UP), [1, 0, 0])
    np.testing.assert_allclose(tangential_velocity([0, 0, 1], UP), [0, 0, 0])
    np.testing.assert_allclose(tangential_velocity([1, 0, 1], UP), [1, 0, 0])


def test_signed_distance_and_projection():
    assert signed_distance([1, 2, 3], FLAT) == 3
    assert signed_distance([4, -2, 0], FLAT) == 0
    raised = Face(0, UP, np.array([0, 0, 1.0]), -1.0)
    assert signed_distance([5, 5, 0], raised) == -1
    np.testing.assert_array_equal(project_onto_face([1, 2, 3], FLAT), [1, 2, 0])
    np.testing.assert_array_equal(project_onto_face([1, 2, 0], FLAT), [1, 2, 0])


def test_forward_direction():
    p = VehicleParams()
    assert forward_direction(VehicleState([0, 0, 0], v=[2, 0, 0]), FLAT, p).tolist() == [1, 0, 0]
    np.testing.assert_allclose(forward_direction(VehicleState([0, 0, 0], [0, 0, 0]), FLAT, p), [1, 0, 0])
    np.testing.assert_allclose(forward_direction(VehicleState([0, 0, 0], [math.pi / 2, 0, 0]), FLAT, p),
                               [0, 1, 0], atol=1e-15)


def test_update_velocity_examples():
    st = VehicleState([0, 0, 0], v=[1, 0, 0])
    v = update_velocity(st, 0.0, FLAT, VehicleParams(friction_mu=0.0, gravity=9.81, dt=0.1))
    np.testing.assert_allclose(v, [1, 0, -0.981], atol=1e-15)
    v = update_velocity(st, 0.0, FLAT, VehicleParams(friction_mu=0.0, gravity=0.0))
    np.testing.assert_array_equal(v, [1, 0, 0])
    v = update_velocity(st, 2.0, FLAT, VehicleParams(friction_mu=0.0, gravity=0.0, dt=0.1))
    np.testing.assert_allclose(v, [1.2, 0, 0], atol=1e-15)


def test_no_friction_at_rest_without_command():
    st = VehicleState([0, 0, 0])
    v = update_velocity(st, 0.0, FLAT, VehicleParams(friction_mu=0.5, gravity=0.0))
    np.testing.assert_array_equal(v, [0, 0, 0])


def test_tangential_gravity_is_downhill():
    n = np.array([0.0, math.sin(0.3), math.cos(0.3)])
    face = Face(0, n, np.zeros(3), 0.0)
    v = update_velocity(VehicleState([0, 0, 0]), 0.0, face,
                        VehicleParams(friction_mu=0.0, gravity_model="tangential"))
    assert abs(np.dot(v, n)) < 1e-15
    assert v[2] < 0


def test_update_orientation():
    p = VehicleParams()
    st = VehicleState([0, 0, 0], [0.3, 0, 0], [0, 0, 0])
    assert update_orientation(st, 0.7, FLAT, p)[0] == 0.3
    yaw, pitch, roll = update_orientation(VehicleState([0, 0, 0], v=[1, 0, 0]), 0.436, FLAT,
                                          VehicleParams(wheelbase=0.5, dt=0.1))
    assert yaw == pytest.approx(0.2 * math.tan(0.436), abs=1e-15)
    assert yaw == pytest.approx(0.0933, abs=2e-4)  # quoted to three figures
    assert pitch == pytest.approx(math.pi / 2) and roll == 0


def test_wrap_angle():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert wrap_angle(0.123) == 0.123


def test_step_on_flat(flat_world):
    params = VehicleParams(friction_mu=0.0, gravity=0.0)
    st = VehicleState([0, 0, 0], FLAT_THETA, [1, 0, 0])
    nxt = step(st, (0.0, 0.0), flat_world, params)
    np.testing.assert_allclose(nxt.p, [0.1, 0, 0], atol=1e-15)
    np.testing.assert_array_equal(nxt.theta, st.theta)
    rest = VehicleState([0.5, -0.5, 0], FLAT_THETA)
    assert step(rest, (0.0, 0.0), flat_world, params).same_as(rest)


def test_step_size_consistency(flat_world):
    params = VehicleParams(friction_mu=0.0, gravity=0.0)
    rng = np.random.default_rng(0)
    for _ in range(50):
        v = np.r_[rng.normal(size=2), 0.0]
        st = VehicleState(np.r_[rng.uniform(-2, 2, 2), 0.0], FLAT_THETA, v)
        nxt = step(st, (0.0, 0.0), flat_world, params)
        assert abs(np.linalg.norm(nxt.p - st.p) - np.linalg.norm(v) * 0.1) < 1e-12


def test_step_is_pure(small_terrain_world):
    st = initial_state(small_terrain_world, [0.3, -0.2, 0.0])
    st = VehicleState(st.p, st.theta, [0.7, -0.4, 0.1])
    a = step(st, (1.3, -0.2), small_terrain_world, VehicleParams())
    b = step(st, (1.3, -0.2), small_terrain_world, VehicleParams())
    assert a.same_as(b)


def test_leaving_the_terrain(flat_world):
    st = VehicleState([4.9, 0, 0], FLAT_THETA, [5000.0, 0, 0])
    with pytest.raises(LeftTerrainError):
        step(st, (0.0, 0.0), flat_world, VehicleParams())


@pytest.mark.parametrize("gravity_model", ["as-paper", "tangential"])
@pytest.mark.parametrize("steering_model", ["heading-coupled", "yaw-only"])
def test_kernel_matches_numpy_oracle(small_terrain_world, gravity_model, steering_model):
    world = small_terrain_world
    params = VehicleParams(gravity_model=gravity_model, steering_model=steering_model)
    rng = np.random.default_rng(11)
    lo, hi = world.mesh.aabb
    checked = 0
    for _ in range(300):
        st = initial_state(world, np.r_[rng.uniform(lo[:2] + 1, hi[:2] - 1), 0.0],
                           yaw=rng.uniform(-math.pi, math.pi))
        v = rng.normal(size=3) * rng.choice([0.0, 1.0, 3.0])
        st = VehicleState(st.p, st.theta, v)
        u = (rng.uniform(-3, 3), rng.uniform(-0.785, 0.785))
        try:
            got = step(st, u, world, params)
        except LeftTerrainError:
            continue
        want = oracle_step(st, u[0], u[1], world, params)
        np.testing.assert_allclose(got.p, want.p, rtol=0, atol=1e-12)
        np.testing.assert_allclose(got.v, want.v, rtol=0, atol=1e-12)
        np.testing.assert_allclose(got.theta, want.theta, rtol=0, atol=1e-12)
        checked += 1
    assert checked > 250


def test_batch_equals_single(small_terrain_world):
    world, params = small_terrain_world, VehicleParams()
    rng = np.random.default_rng(2)
    states = [VehicleState(initial_state(world, np.r_[rng.uniform(-3, 3, 2), 0.0]).p,
                           [0.1, 1.0, 0.0], rng.normal(size=3)) for _ in range(20)]
    a, d = rng.uniform(-3, 3, 20), rng.uniform(-0.7, 0.7, 20)
    out = step_batch(np.array([s.p for s in states]), np.array([s.theta for s in states]),
                     np.array([s.v for s in states]), a, d, world, params)
    for i, s in enumerate(states):
        one = step(s, (a[i], d[i]), world, params)
        assert np.array_equal(one.p, out.p[i]) and np.array_equal(one.v, out.v[i])


def test_steering_changes_direction_of_travel(flat_world):
    params = VehicleParams(friction_mu=0.0, gravity=0.0)
    st = VehicleState([0, 0, 0], FLAT_THETA, [1, 0, 0])
    for _ in range(10):
        st = step(st, (0.0, 0.5), flat_world, params)
    assert st.v[1] > 0.5
    assert abs(np.linalg.norm(st.v) - 1) < 1e-12
    assert st.yaw == pytest.approx(math.atan2(st.v[1], st.v[0]))


def test_residual_decays_with_dt():
    world = World.build(ridge_square(), voxel_size=0.05, padding=2.0)
    start = project_onto_face(np.array([0.3, 0.0, 0.0]), world.face_at([0.3, 0.0, 0.0]))
    f0 = world.face_at(start)
    vt = tangential_velocity(np.array([-1.0, 1.0, 0.0]), f0.normal) * 3
    residuals = []
    for dt in (0.4, 0.2, 0.1, 0.05, 0.025):
        tentative = start + vt * dt
        residuals.append(abs(signed_distance(tentative, world.face_at(tentative))))
    assert all(b <= a for a, b in zip(residuals, residuals[1:]))
    assert residuals[0] > 0.01 and residuals[-1] < residuals[0] / 4


def test_initial_state_faces_goal(small_terrain_world):
    st = initial_state(small_terrain_world, [0, 0, 1.0], heading_to=[1.0, 1.0, 0])
    assert st.yaw == pytest.approx(math.atan2(1.0 - st.p[1], 1.0 - st.p[0]))
    assert abs(signed_distance(st.p, small_terrain_world.face_at(st.p))) < 1e-9
    assert not st.v.any()


def test_params_validation():
    with pytest.raises(ValueError):
        VehicleParams(dt=0)
    with pytest.raises(ValueError):
        VehicleParams(gravity_model="newtonian")
    with pytest.raises(ValueError):
        VehicleParams(a_min=1, a_max=0)
