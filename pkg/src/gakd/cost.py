"""Transition and rollout costs: distance-to-goal plus terrain traversability."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernel
from .dynamics import VehicleParams, VehicleState, _dot, _norm, kernel_args, step
from .world import World


@dataclass(frozen=True)
class CostWeights:
    alpha1: float = 1.0
    alpha2: float = 1.0
    off_mesh_penalty: float = 1e6

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValueError("cost weights must be non-negative")
        if self.alpha1 == 0 and self.alpha2 == 0:
            raise ValueError("alpha1 and alpha2 cannot both be zero")
        if not self.off_mesh_penalty > 0:
            raise ValueError("off_mesh_penalty must be > 0")


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    distance_term: float
    traversability_term: float
    slope: float
    orthogonality: float


def distance_cost(p_next, p_target) -> float:
    d = np.asarray(p_next, dtype=np.float64) - np.asarray(p_target, dtype=np.float64)
    return float(_norm(d))


def slope_penalty(n_t, j) -> float:
    """|n_t . j| with the unnormalized path vector ``j = p_next - p_target``."""
    return float(abs(_dot(np.asarray(n_t, dtype=np.float64), np.asarray(j, dtype=np.float64))))


def orthogonality_penalty(n_t, n_t1) -> float:
    lam = 1.0 - abs(_dot(np.asarray(n_t, dtype=np.float64), np.asarray(n_t1, dtype=np.float64)))
    return float(np.clip(lam, 0.0, 1.0))


def traversability_cost(n_t, n_t1, p_next, p_target) -> float:
    j = np.asarray(p_next, dtype=np.float64) - np.asarray(p_target, dtype=np.float64)
    return 0.5 * (slope_penalty(n_t, j) + orthogonality_penalty(n_t, n_t1))


def _terms(n_t, n_t1, p_next, target, weights: CostWeights):
    j = p_next - target
    delta = _norm(j)
    sigma = np.abs(_dot(n_t, j))
    lam = np.clip(1.0 - np.abs(_dot(n_t, n_t1)), 0.0, 1.0)
    pi = 0.5 * (sigma + lam)
    total = weights.alpha1 * delta + weights.alpha2 * pi
    return total, delta, pi, sigma, lam


def transition_cost(state_t: VehicleState, state_t1: VehicleState, target, world: World,
                    weights: CostWeights) -> CostBreakdown:
    """Cost of ``state_t -> state_t1``; normals come from the faces under each position."""
    n_t = world.face_at(state_t.p).normal
    n_t1 = world.face_at(state_t1.p).normal
    vals = _terms(n_t, n_t1, state_t1.p, np.asarray(target, dtype=np.float64), weights)
    return CostBreakdown(*(float(x) for x in vals))


def rollout_batch(state: VehicleState, controls: np.ndarray, target, world: World,
                  weights: CostWeights, params: VehicleParams):
    """Total cost of K control sequences (shape ``(K, H, 2)``) from a common start state.

    Returns ``(costs, off_mesh)``. A rollout that leaves the terrain stops accumulating
    at that step and is charged ``off_mesh_penalty`` once.
    """
    controls = np.ascontiguousarray(controls, dtype=np.float64)
    if controls.ndim != 3 or controls.shape[2] != 2:
        raise ValueError("controls must have shape (K, H, 2)")
    return _kernel.rollout(state.p, state.theta, state.v, controls,
                           np.asarray(target, dtype=np.float64), *kernel_args(world, params),
                           weights.alpha1, weights.alpha2, weights.off_mesh_penalty)


def rollout_cost(initial_state: VehicleState, controls, target, world: World,
                 weights: CostWeights, params: VehicleParams) -> float:
    """Summed transition cost of one control sequence over its horizon."""
    controls = np.asarray(controls, dtype=np.float64).reshape(-1, 2)
    if len(controls) == 0:
        return 0.0
    costs, _ = rollout_batch(initial_state, controls[None], target, world, weights, params)
    return float(costs[0])


def rollout_states(initial_state: VehicleState, controls, world: World,
                   params: VehicleParams) -> list[VehicleState]:
    """Sequential replay with :func:`step`; stops early if the vehicle leaves the terrain."""
    states = [initial_state]
    for u in np.asarray(controls, dtype=np.float64).reshape(-1, 2):
        try:
            states.append(step(states[-1], (float(u[0]), float(u[1])), world, params))
        except LookupError:
            break
    return states

