"""MPPI and log-MPPI receding-horizon baselines sharing dynamics, cost and outer loop with GAKD."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import CostWeights, rollout_batch
from .dynamics import VehicleParams, VehicleState
from .ga_planner import PlanningContext, Trajectory, receding_horizon
from .world import World

VARIANTS = ("gaussian", "log_normal_mixture")


@dataclass(frozen=True)
class MPPIConfig:
    samples: int = 30
    horizon: int = 10
    temperature: float = 1.0
    noise_sigma: tuple[float, float] = (1.0, 0.25)
    log_sigma: float = 0.6  # spread of the log-normal factor in the mixture variant
    seed: int = 0
    max_steps: int = 1000
    goal_tolerance: float = 0.1
    variant: str = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "noise_sigma", tuple(float(s) for s in self.noise_sigma))
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if len(self.noise_sigma) != 2 or min(self.noise_sigma) < 0:
            raise ValueError("noise_sigma needs two non-negative entries")
        if self.log_sigma < 0:
            raise ValueError("log_sigma must be >= 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not self.goal_tolerance > 0:
            raise ValueError("goal_tolerance must be > 0")


def gaussian_noise(rng: np.random.Generator, shape, sigma) -> np.ndarray:
    return rng.standard_normal(shape) * np.asarray(sigma)


def log_normal_mixture_noise(rng: np.random.Generator, shape, sigma, log_sigma: float) -> np.ndarray:
    """Product of a Gaussian and a log-normal factor with unit second moment.

    With ``ln X ~ N(-s^2, s^2)`` we get ``E[X^2] = 1``, so the product keeps standard
    deviation ``sigma`` while gaining heavier tails; ``s = 0`` is plain Gaussian noise.
    """
    normal = rng.standard_normal(shape)
    log_factor = -log_sigma ** 2 + log_sigma * rng.standard_normal(shape)
    return normal * np.exp(log_factor) * np.asarray(sigma)


def mppi_weights(costs: np.ndarray, temperature: float) -> np.ndarray:
    shifted = -(costs - costs.min()) / temperature
    w = np.exp(shifted)
    return w / w.sum()


def _mppi(x_current, x_target, nominal, context: PlanningContext, config: MPPIConfig,
          rng: np.random.Generator, noise_fn):
    space = context.space
    nominal = space.clip(np.asarray(nominal, dtype=np.float64).reshape(config.horizon, 2))
    eps = noise_fn(rng, (config.samples, config.horizon, 2))
    samples = space.clip(nominal[None] + eps)
    costs, off = rollout_batch(x_current, samples, x_target, context.world, context.weights,
                               context.params)
    if off.all():
        return nominal, costs
    w = mppi_weights(costs, config.temperature)
    return space.clip(np.tensordot(w, samples, axes=1)), costs


def mppi_optimize(x_current: VehicleState, x_target, nominal_sequence, context: PlanningContext,
                  config: MPPIConfig, rng: np.random.Generator) -> np.ndarray:
    """One information-theoretic MPPI update of ``nominal_sequence`` with Gaussian noise."""
    seq, _ = _mppi(x_current, x_target, nominal_sequence, context, config, rng,
                   lambda r, shape: gaussian_noise(r, shape, config.noise_sigma))
    return seq


def log_mppi_optimize(x_current: VehicleState, x_target, nominal_sequence, context: PlanningContext,
                      config: MPPIConfig, rng: np.random.Generator) -> np.ndarray:
    """MPPI update with normal / log-normal mixture perturbations."""
    seq, _ = _mppi(x_current, x_target, nominal_sequence, context, config, rng,
                   lambda r, shape: log_normal_mixture_noise(r, shape, config.noise_sigma,
                                                             config.log_sigma))
    return seq


def plan_with(optimizer, start, goal, world: World, config: MPPIConfig, params: VehicleParams,
              weights: CostWeights) -> Trajectory:
    """Receding-horizon planning with an MPPI-style ``optimizer``.

    The nominal sequence is warm-started by dropping the applied control and repeating
    the last one.
    """
    if isinstance(optimizer, str):
        optimizer = {"mppi": mppi_optimize, "log-mppi": log_mppi_optimize}[optimizer]
    context = PlanningContext(world, weights, params)
    goal_arr = np.asarray(goal, dtype=np.float64)
    root = np.random.SeedSequence(config.seed)

    def choose(state, k, prev):
        nominal = np.zeros((config.horizon, 2)) if prev is None else np.concatenate([prev[1:], prev[-1:]])
        rng = np.random.default_rng(np.random.SeedSequence(entropy=root.entropy, spawn_key=(k,)))
        return optimizer(state, goal_arr, nominal, context, config, rng), config.samples

    return receding_horizon(start, goal, world, params, weights, choose,
                            config.max_steps, config.goal_tolerance)
