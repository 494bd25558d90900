"""Genetic receding-horizon optimizer over (acceleration, steering) control sequences."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import CostBreakdown, CostWeights, rollout_batch, transition_cost
from .dynamics import LeftTerrainError, VehicleParams, VehicleState, initial_state, step
from .spatial_index import OutOfBoundsError
from .world import World


@dataclass(frozen=True)
class ControlSpace:
    a_min: float
    a_max: float
    delta_min: float
    delta_max: float

    def __post_init__(self):
        if self.a_min > self.a_max or self.delta_min > self.delta_max:
            raise ValueError("control bounds are inverted")

    @classmethod
    def from_params(cls, params: VehicleParams) -> "ControlSpace":
        return cls(params.a_min, params.a_max, params.delta_min, params.delta_max)

    @property
    def low(self) -> np.ndarray:
        return np.array([self.a_min, self.delta_min])

    @property
    def high(self) -> np.ndarray:
        return np.array([self.a_max, self.delta_max])

    def contains(self, u) -> bool:
        u = np.asarray(u, dtype=np.float64)
        return bool(np.all((u >= self.low) & (u <= self.high)))

    def clip(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.low, self.high)


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 30
    generations: int = 50
    horizon: int = 10
    mutation_rate: float = 0.2
    mutation_scale: float = 0.25
    tournament_size: int = 3
    fitness_stop_threshold: float = 1e-8
    stop_when: str = "below"  # "below": bail out on hopeless fitness; "above": stop once satisfied
    seed: int = 0
    max_steps: int = 1000
    goal_tolerance: float = 0.1
    warm_start: bool = False  # also seed each decision with the previous best, shifted by one step

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1 or self.horizon < 1:
            raise ValueError("generations and horizon must be >= 1")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")
        if not 2 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must be in [2, population_size]")
        if not self.goal_tolerance > 0:
            raise ValueError("goal_tolerance must be > 0")
        if self.stop_when not in ("below", "above"):
            raise ValueError("stop_when must be 'below' or 'above'")


@dataclass(frozen=True)
class PlanningContext:
    world: World
    weights: CostWeights
    params: VehicleParams

    @property
    def space(self) -> ControlSpace:
        return ControlSpace.from_params(self.params)


@dataclass
class Trajectory:
    states: list[VehicleState]
    applied_controls: list[tuple[float, float]] = field(default_factory=list)
    per_step_costs: list[CostBreakdown] = field(default_factory=list)
    reached_goal: bool = False
    goal: np.ndarray | None = None
    left_terrain: bool = False
    rollouts: int = 0
    compute_time: float = 0.0

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.p for s in self.states])


# ----------------------------------------------------------------- GA operators

def sample_population(space: ControlSpace, n: int, horizon: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` control sequences of shape ``(horizon, 2)``, uniform over the closed box."""
    u = rng.random((n, horizon, 2))
    low, high = space.low, space.high
    return np.clip(low + u * (high - low), low, high)


def fitness(cost):
    return 1.0 / (1.0 + np.asarray(cost, dtype=np.float64))


def tournament_select(fitnesses, tournament_size: int, rng: np.random.Generator) -> int:
    """Best of ``tournament_size`` distinct random individuals; ties go to the lowest index."""
    fitnesses = np.asarray(fitnesses)
    drawn = np.sort(rng.choice(len(fitnesses), size=tournament_size, replace=False))
    return int(drawn[np.argmax(fitnesses[drawn])])


def _tournaments(fitnesses: np.ndarray, k: int, count: int, rng: np.random.Generator) -> np.ndarray:
    # vectorized tournament_select: row r of the key matrix is mating slot r
    n = len(fitnesses)
    drawn = np.argsort(rng.random((count, n)), axis=1)[:, :k]
    fit = fitnesses[drawn]
    best = fit.max(axis=1, keepdims=True)
    return np.where(fit == best, drawn, n).min(axis=1)


def crossover(u_a, u_b, t_c: int | None = None, rng: np.random.Generator | None = None):
    """One-point crossover: child1 takes ``u_a`` before ``t_c`` and ``u_b`` from ``t_c`` on."""
    u_a = np.asarray(u_a)
    u_b = np.asarray(u_b)
    if u_a.shape != u_b.shape:
        raise ValueError("parents must have equal length")
    h = len(u_a)
    if t_c is None:
        t_c = int(rng.integers(1, h)) if h >= 2 else h
    if not 0 <= t_c <= h:
        raise ValueError("t_c must lie in [0, H]")
    child1 = np.concatenate([u_a[:t_c], u_b[t_c:]])
    child2 = np.concatenate([u_b[:t_c], u_a[t_c:]])
    return child1, child2


def mutate(sequence, space: ControlSpace, mutation_rate: float, mutation_scale: float,
           rng: np.random.Generator) -> np.ndarray:
    """Perturb each gene with probability ``mutation_rate`` and clamp back into the box."""
    seq = np.asarray(sequence, dtype=np.float64)
    span = space.high - space.low
    hit = rng.random(seq.shape) < mutation_rate
    eps = rng.uniform(-1.0, 1.0, seq.shape) * mutation_scale * span
    return space.clip(np.where(hit, seq + eps, seq))


def _seed_child(seed_seq: np.random.SeedSequence, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed_seq.entropy, spawn_key=tuple(seed_seq.spawn_key) + key)
    return np.random.default_rng(ss)


def _next_generation(pop, fit, elite, space: ControlSpace, cfg: GAConfig, rng):
    n, h = pop.shape[0], pop.shape[1]
    n_children = n - 1
    pairs = (n_children + 1) // 2
    parents = _tournaments(fit, cfg.tournament_size, 2 * pairs, rng).reshape(pairs, 2)
    if h >= 2:
        cuts = rng.integers(1, h, size=pairs)
    else:
        cuts = np.full(pairs, h)
    t = np.arange(h)[None, :, None]
    first = t < cuts[:, None, None]
    a, b = pop[parents[:, 0]], pop[parents[:, 1]]
    children = np.concatenate([np.where(first, a, b), np.where(first, b, a)], axis=0)
    # interleave so child pairs stay adjacent, then drop the surplus child
    children = children.reshape(2, pairs, h, 2).transpose(1, 0, 2, 3).reshape(2 * pairs, h, 2)
    children = mutate(children[:n_children], space, cfg.mutation_rate, cfg.mutation_scale, rng)
    return np.concatenate([elite[None], children], axis=0)


@dataclass
class OptimizeResult:
    sequence: np.ndarray
    cost: float
    generations: int
    rollouts: int
    best_cost_history: list[float]


def optimize(x_current: VehicleState, x_target, context: PlanningContext, config: GAConfig,
             seed_seq: np.random.SeedSequence, initial=None) -> OptimizeResult:
    """Evolve control sequences for one planning decision.

    Randomness for generation ``g`` comes from the substream ``seed_seq + (g,)``; rollouts
    draw none, so evaluation order cannot change results. ``initial`` optionally replaces
    leading members of the sampled population.
    """
    space = context.space
    n, h = config.population_size, config.horizon
    pop = sample_population(space, n, h, _seed_child(seed_seq, 0))
    if space.contains([0.0, 0.0]):
        pop[0] = 0.0
    if initial is not None:
        extra = np.asarray(initial, dtype=np.float64).reshape(-1, h, 2)[: n - 1]
        pop[1:1 + len(extra)] = space.clip(extra)

    best_seq, best_cost = pop[0].copy(), math.inf
    history = []
    rollouts = 0
    gens = 0
    for g in range(1, config.generations + 1):
        costs, _ = rollout_batch(x_current, pop, x_target, context.world, context.weights, context.params)
        rollouts += len(pop)
        gens = g
        fit = fitness(costs)
        i = int(np.argmax(fit))
        if costs[i] < best_cost:
            best_cost, best_seq = float(costs[i]), pop[i].copy()
        history.append(best_cost)
        if config.stop_when == "below" and fit[i] < config.fitness_stop_threshold:
            break
        if config.stop_when == "above" and fit[i] >= config.fitness_stop_threshold:
            break
        if g == config.generations:
            break
        pop = _next_generation(pop, fit, pop[i], space, config, _seed_child(seed_seq, g))
    return OptimizeResult(best_seq, best_cost, gens, rollouts, history)


# ------------------------------------------------------------- receding horizon

Chooser = Callable[[VehicleState, int, "np.ndarray | None"], "tuple[np.ndarray, int]"]


def _require_inside(world: World, point, what: str):
    if not world.contains(point):
        raise OutOfBoundsError(f"{what} {np.asarray(point, dtype=float).tolist()} is outside the terrain index")


def receding_horizon(start, goal, world: World, params: VehicleParams, weights: CostWeights,
                     choose: Chooser, max_steps: int, goal_tolerance: float) -> Trajectory:
    """Shared outer loop: optimize, apply the first control, repeat until the goal is reached.

    ``choose(state, step_index, previous_sequence)`` returns ``(sequence, rollouts_used)``.
    """
    _require_inside(world, start, "start")
    _require_inside(world, goal, "goal")
    goal = np.asarray(goal, dtype=np.float64)
    t0 = time.perf_counter()
    state = initial_state(world, start, heading_to=goal)
    traj = Trajectory(states=[state], goal=goal)
    if np.linalg.norm(state.p - goal) < goal_tolerance:
        traj.reached_goal = True
        traj.compute_time = time.perf_counter() - t0
        return traj
    prev = None
    for k in range(max_steps):
        seq, used = choose(state, k, prev)
        traj.rollouts += used
        u = (float(seq[0, 0]), float(seq[0, 1]))
        try:
            nxt = step(state, u, world, params)
        except LeftTerrainError:
            traj.left_terrain = True
            break
        traj.per_step_costs.append(transition_cost(state, nxt, goal, world, weights))
        traj.applied_controls.append(u)
        traj.states.append(nxt)
        state, prev = nxt, seq
        if np.linalg.norm(state.p - goal) < goal_tolerance:
            traj.reached_goal = True
            break
    traj.compute_time = time.perf_counter() - t0
    return traj


def plan(start, goal, world: World, config: GAConfig, params: VehicleParams,
         weights: CostWeights) -> Trajectory:
    """Genetic receding-horizon planner from ``start`` to ``goal``."""
    context = PlanningContext(world, weights, params)
    root = np.random.SeedSequence(config.seed)
    goal_arr = np.asarray(goal, dtype=np.float64)

    def choose(state, k, prev):
        ss = np.random.SeedSequence(entropy=root.entropy, spawn_key=(k,))
        warm = None
        if config.warm_start and prev is not None:
            warm = np.concatenate([prev[1:], prev[-1:]])[None]
        res = optimize(state, goal_arr, context, config, ss, initial=warm)
        return res.sequence, res.rollouts

    return receding_horizon(start, goal, world, params, weights, choose,
                            config.max_steps, config.goal_tolerance)
