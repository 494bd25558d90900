"""Car-like vehicle moving on a triangular mesh surface.

The vector helpers accept a single 3-vector or a stack of them (shape ``(..., 3)``).
Transitions run through the compiled row kernel; :func:`step` is that kernel on a
batch of one, so batched rollouts and single steps agree bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernel
from .mesh import Face
from .spatial_index import OutOfBoundsError
from .world import World

GRAVITY_MODELS = ("as-paper", "tangential")
STEERING_MODELS = ("heading-coupled", "yaw-only")


class LeftTerrainError(OutOfBoundsError):
    """The tentative position of a step fell outside the indexed terrain."""


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 0.5
    friction_mu: float = 0.1
    gravity: float = 9.81
    dt: float = 0.1
    a_min: float = -3.0
    a_max: float = 3.0
    delta_min: float = -0.785
    delta_max: float = 0.785
    rest_speed_epsilon: float = 1e-6
    gravity_model: str = "as-paper"
    steering_model: str = "heading-coupled"

    def __post_init__(self):
        if not self.wheelbase > 0:
            raise ValueError("wheelbase must be > 0")
        if self.gravity < 0:
            raise ValueError("gravity must be >= 0")
        if self.friction_mu < 0:
            raise ValueError("friction_mu must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.a_min < self.a_max:
            raise ValueError("a_min must be < a_max")
        if not self.delta_min < self.delta_max:
            raise ValueError("delta_min must be < delta_max")
        if self.gravity_model not in GRAVITY_MODELS:
            raise ValueError(f"gravity_model must be one of {GRAVITY_MODELS}")
        if self.steering_model not in STEERING_MODELS:
            raise ValueError(f"steering_model must be one of {STEERING_MODELS}")


class ControlInput(NamedTuple):
    a: float
    delta: float


@dataclass(frozen=True, eq=False)
class VehicleState:
    p: np.ndarray
    theta: np.ndarray = field(default_factory=lambda: np.zeros(3))  # yaw, pitch, roll
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=np.float64).reshape(3))
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=np.float64).reshape(3))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=np.float64).reshape(3))

    @property
    def yaw(self) -> float:
        return float(self.theta[0])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.p, self.theta, self.v])

    def same_as(self, other: "VehicleState") -> bool:
        return bool(np.array_equal(self.as_array(), other.as_array()))


# ------------------------------------------------------------------ vector helpers

def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _norm(a):
    return np.sqrt(_dot(a, a))


def wrap_angle(x):
    """Map angles into (-pi, pi]; values already in range are returned untouched."""
    x = np.asarray(x, dtype=np.float64)
    wrapped = np.pi - np.mod(np.pi - x, 2 * np.pi)
    return np.where((x > np.pi) | (x <= -np.pi), wrapped, x)


def tangential_velocity(v, n):
    v = np.asarray(v, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    return v - _dot(v, n)[..., None] * n


def signed_distance(point, face: Face) -> float:
    n = face.normal
    return float((_dot(np.asarray(point, dtype=np.float64), n) + face.plane_offset) / _norm(n))


def project_onto_face(point, face: Face) -> np.ndarray:
    point = np.array(point, dtype=np.float64)
    n = face.normal
    # repeat until the residual is at rounding level, so projecting again changes nothing
    for _ in range(_kernel.PROJECT_PASSES):
        gamma = signed_distance(point, face)
        scale = abs(point[0]) + abs(point[1]) + abs(point[2]) + abs(face.plane_offset)
        if abs(gamma) <= _kernel.ON_PLANE_ULPS * np.finfo(float).eps * scale:
            break
        point = point - gamma * n
    return point


_EX = np.array([1.0, 0.0, 0.0])
_EY = np.array([0.0, 1.0, 0.0])
_EZ = np.array([0.0, 0.0, 1.0])


def _unit_or(vec, fallback):
    n = _norm(vec)
    good = n > 1e-9
    return np.where(good[..., None], vec / np.where(good, n, 1.0)[..., None], fallback)


def _forward(vt, speed, yaw, n, eps):
    moving = speed >= eps
    along_v = vt / np.where(moving, speed, 1.0)[..., None]
    if np.all(moving):
        return along_v
    heading = np.stack([np.cos(yaw), np.sin(yaw), np.zeros_like(yaw)], axis=-1)
    # heading parallel to n: use the in-plane image of the x axis, then of the y axis
    ey = _unit_or(tangential_velocity(np.broadcast_to(_EY, n.shape), n), np.zeros(3))
    ex = _unit_or(tangential_velocity(np.broadcast_to(_EX, n.shape), n), ey)
    at_rest = _unit_or(tangential_velocity(heading, n), ex)
    return np.where(moving[..., None], along_v, at_rest)


def forward_direction(state: VehicleState, face: Face, params: VehicleParams) -> np.ndarray:
    """Unit vector along the tangential velocity, or the projected yaw heading at rest."""
    vt = tangential_velocity(state.v, face.normal)
    return _forward(vt, _norm(vt), np.float64(state.yaw), face.normal, params.rest_speed_epsilon)


def _velocity_update(v, vt, speed, yaw, a, n, params: VehicleParams):
    g, dt = params.gravity, params.dt
    fwd = _forward(vt, speed, yaw, n, params.rest_speed_epsilon)
    # no friction on a stationary vehicle with zero commanded acceleration
    friction_on = ~((speed < params.rest_speed_epsilon) & (a == 0))
    friction = np.where(friction_on, params.friction_mu * g, 0.0)
    if params.gravity_model == "as-paper":
        grav = -g * n
    else:
        # downhill component of gravity: -g (z - n_z n)
        grav = -g * (_EZ - n[..., 2:3] * n)
    accel = a[..., None] * fwd - friction[..., None] * fwd + grav
    return v + accel * dt


def update_velocity(state: VehicleState, a: float, face: Face, params: VehicleParams) -> np.ndarray:
    vt = tangential_velocity(state.v, face.normal)
    return _velocity_update(state.v, vt, _norm(vt), np.float64(state.yaw), np.float64(a),
                            face.normal, params)


def surface_angles(n):
    """Pitch atan2(n_z, hypot(n_x, n_y)) and roll atan2(n_y, n_z) from a face normal."""
    n = np.asarray(n, dtype=np.float64)
    pitch = np.arctan2(n[..., 2], np.sqrt(n[..., 0] ** 2 + n[..., 1] ** 2))
    roll = np.arctan2(n[..., 1], n[..., 2])
    return pitch, roll


def yaw_increment(speed, delta, params: VehicleParams):
    return speed / params.wheelbase * np.tan(delta) * params.dt


def update_orientation(state: VehicleState, delta: float, face: Face, params: VehicleParams):
    """New (yaw, pitch, roll). ``face`` supplies both the speed frame and the surface angles."""
    vt = tangential_velocity(state.v, face.normal)
    yaw = float(wrap_angle(state.yaw + yaw_increment(_norm(vt), delta, params)))
    pitch, roll = surface_angles(face.normal)
    return yaw, float(pitch), float(roll)


class StepBatch(NamedTuple):
    p: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    face_from: np.ndarray
    face_to: np.ndarray
    face_after: np.ndarray
    ok: np.ndarray


def kernel_args(world: World, params: VehicleParams) -> tuple:
    """Arrays and flags the compiled kernels need, in call order."""
    prm = np.array([params.wheelbase, params.friction_mu, params.gravity, params.dt,
                    params.rest_speed_epsilon])
    gmode = _kernel.GRAVITY_AS_PAPER if params.gravity_model == "as-paper" else _kernel.GRAVITY_TANGENTIAL
    smode = _kernel.STEER_COUPLED if params.steering_model == "heading-coupled" else _kernel.STEER_YAW_ONLY
    grid, mesh = world.grid, world.mesh
    return (mesh.face_normals, mesh.plane_offsets, grid.table, grid.origin, grid.voxel_size,
            prm, gmode, smode)


def step_batch(p, theta, v, a, delta, world: World, params: VehicleParams) -> StepBatch:
    """Advance K states at once. Rows that leave the index get ``ok=False``.

    Shapes: ``p, theta, v`` are ``(K, 3)``; ``a, delta`` are ``(K,)``. ``face_to`` is the
    face the tentative position is projected onto; ``face_after`` is the face indexed at
    the projected position (the next step's departure face).
    """
    f64 = lambda x: np.ascontiguousarray(x, dtype=np.float64)
    P, TH, V, faces, ok = _kernel.step_rows(f64(p), f64(theta), f64(v), f64(a), f64(delta),
                                            *kernel_args(world, params))
    return StepBatch(P, TH, V, faces[:, 0], faces[:, 1], faces[:, 2], ok)


def step(state: VehicleState, control, world: World, params: VehicleParams) -> VehicleState:
    """One transition of the vehicle; raises :class:`LeftTerrainError` when it leaves the mesh."""
    a, delta = control
    out = step_batch(state.p[None, :], state.theta[None, :], state.v[None, :],
                     np.array([a], dtype=np.float64), np.array([delta], dtype=np.float64),
                     world, params)
    if not out.ok[0]:
        raise LeftTerrainError(f"step from {state.p.tolist()} leaves the terrain")
    return VehicleState(out.p[0], out.theta[0], out.v[0])


def initial_state(world: World, start, heading_to=None, yaw: float | None = None) -> VehicleState:
    """At-rest state on the surface below/above ``start``, facing ``heading_to`` if given."""
    face = world.face_at(start)
    p = project_onto_face(start, face)
    # re-project until the face indexed at the projected point is the one we projected onto
    for _ in range(8):
        under = world.face_at(p)
        if under.id == face.id:
            break
        face, p = under, project_onto_face(p, under)
    if yaw is None:
        yaw = 0.0
        if heading_to is not None:
            d = np.asarray(heading_to, dtype=np.float64) - p
            if d[0] != 0 or d[1] != 0:
                yaw = math.atan2(d[1], d[0])
    pitch, roll = surface_angles(face.normal)
    return VehicleState(p, [float(wrap_angle(yaw)), float(pitch), float(roll)], np.zeros(3))
