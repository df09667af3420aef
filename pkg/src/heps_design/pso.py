"""
Particle swarm optimizer with a state-based adaptive velocity limit.

The velocity limit follows the swarm's evolutionary state: it shrinks when
the global best sits inside a tight cluster (convergence) and widens when
the best particle is far from the others (exploration).
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, List, NamedTuple

import numpy as np
import pandas as pd

from heps_design.errors import DomainError

logger = logging.getLogger(__name__)

N_DEVICES = 8
INFEASIBLE_FITNESS = 1e6


@dataclass(frozen=True)
class SwarmConfig:
    """Swarm hyper-parameters. Defaults are the design-case settings."""

    n_particles: int = 5
    max_iter: int = 50
    w_start: float = 0.9
    w_end: float = 0.4
    c1: float = 2.05
    c2: float = 2.05
    c_zvs: float = 100.0
    vl_min: float = 0.4
    vl_max: float = 0.7
    lo: float = 0.0
    hi: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_particles < 2:
            raise DomainError(f"n_particles must be >= 2, got {self.n_particles}", field="n_particles")
        if self.max_iter < 0:
            raise DomainError(f"max_iter must be >= 0, got {self.max_iter}", field="max_iter")
        if not 0 < self.vl_min <= self.vl_max <= 1:
            raise DomainError(
                f"velocity limits must satisfy 0 < vl_min <= vl_max <= 1, got {self.vl_min}, {self.vl_max}",
                field="vl_min",
            )
        if not self.lo < self.hi:
            raise DomainError(f"bounds must satisfy lo < hi, got [{self.lo}, {self.hi}]", field="lo")
        for name in ("w_start", "w_end", "c1", "c2", "c_zvs"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)}", field=name)

    @property
    def span(self) -> float:
        return self.hi - self.lo

    def inertia(self, iteration: int) -> float:
        """Linearly scheduled inertia weight for a zero-based iteration."""
        if self.max_iter <= 1:
            return self.w_start
        return self.w_start + (self.w_end - self.w_start) * iteration / (self.max_iter - 1)


def fitness(p_loss, n_zvs, c_zvs: float, feasible=True):
    """
    Penalized objective: loss plus c_zvs per device missing ZVS.

    Works elementwise on arrays; infeasible entries get INFEASIBLE_FITNESS.

    Args:
        p_loss: Power loss (W).
        n_zvs: Number of soft-switched devices, possibly fractional.
        c_zvs (float): Penalty weight per missing device.
        feasible: Whether the point can deliver the commanded power.

    Returns:
        float or np.ndarray: Fitness value(s).
    """
    value = np.where(
        feasible,
        np.asarray(p_loss, dtype=float) + np.maximum(N_DEVICES - np.asarray(n_zvs, dtype=float), 0.0) * c_zvs,
        INFEASIBLE_FITNESS,
    )
    return float(value) if value.ndim == 0 else value


def mean_distances(positions: np.ndarray) -> np.ndarray:
    """Mean absolute distance of every particle to all the others."""
    x = np.asarray(positions, dtype=float)
    return np.abs(x[:, None] - x[None, :]).sum(axis=1) / (len(x) - 1)


def evolutionary_factor(positions: np.ndarray, best_index: int) -> float:
    """
    Normalized distance of the global best particle within the swarm.

    Args:
        positions (np.ndarray): Particle positions, at least two.
        best_index (int): Index of the particle holding the global best.

    Returns:
        float: f in [0, 1]; 0 when all mean distances coincide.
    """
    if len(positions) < 2:
        raise DomainError("at least two particles are required", field="positions")
    d = mean_distances(positions)
    d_min, d_max = float(d.min()), float(d.max())
    if d_max - d_min < 1e-12:
        return 0.0
    return min(max((float(d[best_index]) - d_min) / (d_max - d_min), 0.0), 1.0)


def velocity_limit(f: float, cfg: SwarmConfig) -> float:
    """
    Logistic interpolation between vl_min and vl_max times the search span.

    VL(0) = vl_min * span and VL(1) = vl_max * span.
    """
    if cfg.vl_max == cfg.vl_min:
        return cfg.vl_min * cfg.span
    if cfg.vl_max == 1.0:
        return cfg.span if f > 0 else cfg.vl_min * cfg.span
    A = 1.0 / cfg.vl_min - 1.0
    B = math.log((1.0 / cfg.vl_max - 1.0) / A)
    return cfg.span / (1.0 + A * math.exp(B * f))


@dataclass(frozen=True)
class SwarmState:
    positions: np.ndarray
    velocities: np.ndarray
    pbest: np.ndarray
    pbest_fitness: np.ndarray
    gbest: float
    gbest_fitness: float
    gbest_index: int
    iteration: int
    vl: float
    f: float
    distances: np.ndarray
    r: np.ndarray
    rng: np.random.Generator


class SwarmResult(NamedTuple):
    x: float
    fitness: float
    trace: List[float]
    gbest_trace: List[float]


Objective = Callable


def _evaluate(objective: Objective, x: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        return np.asarray(objective(x), dtype=float).reshape(len(x))
    return np.array([objective(float(xi)) for xi in x], dtype=float)


def init_state(objective: Objective, cfg: SwarmConfig, vectorized: bool = False) -> SwarmState:
    """Uniform positions in the bounds and velocities within +-VL(f = 0)."""
    rng = np.random.default_rng(cfg.seed)
    vl = velocity_limit(0.0, cfg)
    positions = cfg.lo + cfg.span * rng.random(cfg.n_particles)
    velocities = rng.uniform(-vl, vl, cfg.n_particles)
    values = _evaluate(objective, positions, vectorized)
    best = int(np.argmin(values))
    return SwarmState(
        positions=positions,
        velocities=velocities,
        pbest=positions.copy(),
        pbest_fitness=values.copy(),
        gbest=float(positions[best]),
        gbest_fitness=float(values[best]),
        gbest_index=best,
        iteration=0,
        vl=vl,
        f=0.0,
        distances=mean_distances(positions),
        r=np.zeros((cfg.n_particles, 2)),
        rng=rng,
    )


def step(state: SwarmState, objective: Objective, cfg: SwarmConfig, vectorized: bool = False) -> SwarmState:
    """
    One swarm iteration.

    Args:
        state (SwarmState): Current state; its generator is advanced.
        objective (Callable): Position -> fitness, or array -> array when vectorized.
        cfg (SwarmConfig): Hyper-parameters.
        vectorized (bool): Evaluate all particles in one objective call.

    Returns:
        SwarmState: The next state, with f and VL prepared for the following step.
    """
    w = cfg.inertia(state.iteration)
    r = state.rng.random((cfg.n_particles, 2))
    x = state.positions
    v = (
        w * state.velocities
        + cfg.c1 * r[:, 0] * (state.pbest - x)
        + cfg.c2 * r[:, 1] * (state.gbest - x)
    )
    v = np.clip(v, -state.vl, state.vl)
    x = np.clip(x + v, cfg.lo, cfg.hi)
    values = _evaluate(objective, x, vectorized)

    improved = values < state.pbest_fitness
    pbest = np.where(improved, x, state.pbest)
    pbest_fitness = np.where(improved, values, state.pbest_fitness)

    gbest, gbest_fitness, gbest_index = state.gbest, state.gbest_fitness, state.gbest_index
    best = int(np.argmin(pbest_fitness))
    if pbest_fitness[best] < gbest_fitness:
        gbest, gbest_fitness, gbest_index = float(pbest[best]), float(pbest_fitness[best]), best

    f = evolutionary_factor(x, gbest_index)
    return replace(
        state,
        positions=x,
        velocities=v,
        pbest=pbest,
        pbest_fitness=pbest_fitness,
        gbest=gbest,
        gbest_fitness=gbest_fitness,
        gbest_index=gbest_index,
        iteration=state.iteration + 1,
        vl=velocity_limit(f, cfg),
        f=f,
        distances=mean_distances(x),
        r=r,
    )


def optimize(objective: Objective, cfg: SwarmConfig, vectorized: bool = False) -> SwarmResult:
    """
    Minimize a 1-D objective over [cfg.lo, cfg.hi].

    Args:
        objective (Callable): Position -> fitness (or array -> array when vectorized).
        cfg (SwarmConfig): Hyper-parameters including the seed.
        vectorized (bool): Evaluate the swarm in one call per iteration.

    Returns:
        SwarmResult: Best position, its fitness, and the per-iteration
        best-fitness and best-position traces.
    """
    state = init_state(objective, cfg, vectorized)
    trace, gbest_trace = [], []
    for _ in range(cfg.max_iter):
        state = step(state, objective, cfg, vectorized)
        trace.append(state.gbest_fitness)
        gbest_trace.append(state.gbest)
    return SwarmResult(x=state.gbest, fitness=state.gbest_fitness, trace=trace, gbest_trace=gbest_trace)


def trace_frame(result: SwarmResult) -> pd.DataFrame:
    """Trace table with columns iteration, g_best, fitness."""
    return pd.DataFrame(
        {
            "iteration": np.arange(1, len(result.trace) + 1),
            "g_best": result.gbest_trace,
            "fitness": result.trace,
        }
    )
