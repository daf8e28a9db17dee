"""PSO, QPSO and annealed weighted QPSO kernels.

All kernels minimize. A cost function takes an ``(N, d)`` array of positions
and returns ``N`` finite costs; it must not keep state the optimizer could
observe. Reductions over the swarm run in index order, so results depend only
on the seed and the stream key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from swarmtrack.core import Particle, Swarm, TrackerConfig, clamp_array, rng_stream

CostFunction = Callable[[np.ndarray], np.ndarray]

VARIANTS = ("PSO", "QPSO", "AWQPSO")


class NonFiniteCostError(ValueError):
    def __init__(self, state: np.ndarray, value: float) -> None:
        super().__init__(f"cost function returned {value} at state {np.asarray(state).tolist()}")
        self.state = np.asarray(state)
        self.value = value


@dataclass(frozen=True)
class AnnealState:
    t0: float
    temperature: float
    iteration: int = 0

    @classmethod
    def start(cls, t0: float) -> AnnealState:
        return cls(t0=t0, temperature=t0 * math.exp(0), iteration=0)


@dataclass(frozen=True)
class OptimizerVariant:
    tag: str
    omega: float = 0.5
    c1: float = 2.05
    c2: float = 2.05
    beta_hi: float = 0.9
    beta_lo: float = 0.5
    t0: float = 100.0
    alpha_max: float = 1.5
    alpha_min: float = 0.5

    def __post_init__(self) -> None:
        if self.tag not in VARIANTS:
            raise ValueError(f"unknown optimizer variant {self.tag!r}; expected one of {VARIANTS}")

    @classmethod
    def from_config(cls, tag: str, config: TrackerConfig) -> OptimizerVariant:
        return cls(
            tag=tag,
            omega=config.omega,
            c1=config.c1,
            c2=config.c2,
            beta_hi=config.beta_hi,
            beta_lo=config.beta_lo,
            t0=config.t0,
            alpha_max=config.alpha_max,
            alpha_min=config.alpha_min,
        )


def pso_step(
    swarm: Swarm, omega: float, c1: float, c2: float, rand: np.random.Generator
) -> Swarm:
    """One velocity/position update of canonical PSO; positions are clamped afterwards."""
    out = swarm.copy()
    x = out.positions
    r1 = rand.random(x.shape)
    r2 = rand.random(x.shape)
    out.velocities = omega * out.velocities + c1 * r1 * (out.pbest - x) + c2 * r2 * (out.gbest - x)
    out.positions = clamp_array(x + out.velocities, out.bounds)
    return out


def update_personal_best(p: Particle, cost: float) -> Particle:
    """Replace the personal best only on strict improvement."""
    if not math.isfinite(cost):
        raise NonFiniteCostError(p.state.as_array(), cost)
    if cost < p.personal_best_cost:
        return Particle(
            state=p.state,
            personal_best=p.state,
            personal_best_cost=cost,
            velocity=p.velocity,
            weight=p.weight,
        )
    return p


def _update_personal_bests(swarm: Swarm) -> None:
    better = swarm.cost < swarm.pbest_cost
    swarm.pbest[better] = swarm.positions[better]
    swarm.pbest_cost[better] = swarm.cost[better]
    swarm.refresh_global_best()


def mean_best(swarm: Swarm) -> np.ndarray:
    """Per-dimension mean of all personal bests."""
    if swarm.size == 0:
        raise ValueError("mean best of an empty swarm")
    return swarm.pbest.sum(axis=0) / swarm.size


def rank_weights(costs: np.ndarray, alpha_max: float, alpha_min: float) -> np.ndarray:
    """Linear rank weights: best cost gets ``alpha_max``, worst ``alpha_min``.

    Ties keep index order. The weights always sum to the particle count.
    """
    m = len(costs)
    if m == 1 or alpha_max == alpha_min:
        return np.ones(m)
    order = np.argsort(costs, kind="stable")
    tau = np.empty(m)
    tau[order] = alpha_max - (alpha_max - alpha_min) * np.arange(m) / (m - 1)
    return tau * (m / tau.sum())


def weighted_mean_best(swarm: Swarm, alpha_max: float = 1.5, alpha_min: float = 0.5) -> np.ndarray:
    if swarm.size == 0:
        raise ValueError("mean best of an empty swarm")
    if not alpha_max >= alpha_min > 0:
        raise ValueError("need alpha_max >= alpha_min > 0")
    tau = rank_weights(swarm.pbest_cost, alpha_max, alpha_min)
    return (tau[:, None] * swarm.pbest).sum(axis=0) / swarm.size


def local_attractor(
    pbest: np.ndarray,
    gbest: np.ndarray,
    rand: np.random.Generator | None = None,
    phi: np.ndarray | float | None = None,
) -> np.ndarray:
    """Random convex combination of personal and global best, per dimension.

    ``phi`` overrides the uniform draw (used for hand-checked values).
    """
    pbest = np.asarray(pbest, dtype=np.float64)
    if phi is None:
        phi = rand.random(pbest.shape)
    return phi * pbest + (1.0 - phi) * np.asarray(gbest, dtype=np.float64)


def qpso_position_update(
    x: np.ndarray,
    attractor: np.ndarray,
    mbest: np.ndarray,
    beta: float,
    rand: np.random.Generator | None = None,
    bounds: np.ndarray | None = None,
    u: np.ndarray | float | None = None,
    sign: np.ndarray | float | None = None,
) -> np.ndarray:
    """Mean-best QPSO move: ``p +/- beta * |mbest - x| * ln(1/u)``.

    ``u`` is drawn on (0, 1] (``1 - U[0, 1)``) so the log stays finite. The
    jump is added when the sign draw is below 0.5.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    x = np.asarray(x, dtype=np.float64)
    if u is None:
        u = 1.0 - rand.random(x.shape)
    if sign is None:
        sign = rand.random(x.shape)
    jump = beta * np.abs(mbest - x) * -np.log(u)
    out = np.where(np.asarray(sign) < 0.5, attractor + jump, attractor - jump)
    return clamp_array(out, bounds)


def beta_schedule(t_current: int, t_max: int, beta_hi: float = 0.9, beta_lo: float = 0.5) -> float:
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if not 0 <= t_current <= t_max:
        raise ValueError(f"t_current {t_current} outside [0, {t_max}]")
    f = (t_max - t_current) / t_max
    # convex-combination form keeps both endpoints exact in floating point
    return beta_hi * f + beta_lo * (1.0 - f)


def cooling_step(a: AnnealState) -> AnnealState:
    iteration = a.iteration + 1
    return AnnealState(t0=a.t0, temperature=a.t0 * math.exp(-iteration), iteration=iteration)


def metropolis_accept(delta_f: float, temperature: float, rand: np.random.Generator) -> bool:
    """Accept a move with probability 1 if it improves, else ``exp(-delta_f / T)``."""
    draw = rand.random()
    if delta_f < 0:
        return True
    return bool(draw < math.exp(-delta_f / temperature))


def metropolis_accept_many(
    delta_f: np.ndarray, temperature: float, rand: np.random.Generator
) -> np.ndarray:
    delta_f = np.asarray(delta_f, dtype=np.float64)
    draws = rand.random(delta_f.shape)
    with np.errstate(over="ignore"):
        theta = np.where(delta_f < 0, 1.0, np.exp(-np.maximum(delta_f, 0.0) / temperature))
    return draws < theta


def _evaluate(cost: CostFunction, positions: np.ndarray) -> np.ndarray:
    values = np.asarray(cost(positions), dtype=np.float64).reshape(-1)
    if values.shape[0] != positions.shape[0]:
        raise ValueError(f"cost function returned {values.shape[0]} values for {positions.shape[0]} states")
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NonFiniteCostError(positions[i], float(values[i]))
    return values


def run_optimizer(
    variant: OptimizerVariant,
    cost: CostFunction,
    config: TrackerConfig,
    swarm: Swarm,
    stream: Sequence[int] = (),
    stop_cost: float | None = None,
) -> Swarm:
    """Evolve ``swarm`` with the chosen kernel for at most ``config.t_max`` iterations.

    At least one iteration always runs; the loop then stops early once the
    global best cost is at or below ``stop_cost`` (falling back to
    ``config.cost_threshold``). Position moves
    and Metropolis draws come from two separate streams keyed on
    ``(config.seed, *stream)``, so the annealed kernel consumes exactly the
    same move draws as plain QPSO. Particles whose move is rejected stay where
    they were.
    """
    sw = swarm.copy()
    sw.iteration = 0
    if not np.all(np.isfinite(sw.cost)):
        sw.cost = _evaluate(cost, sw.positions)
        sw.pbest = sw.positions.copy()
        sw.pbest_cost = sw.cost.copy()
    sw.refresh_global_best()

    threshold = config.cost_threshold if stop_cost is None else stop_cost
    move_rng = rng_stream(config.seed, (*stream, 0))
    accept_rng = rng_stream(config.seed, (*stream, 1))
    anneal = AnnealState.start(variant.t0)
    t_max = config.t_max

    for t in range(t_max):
        if t > 0 and threshold is not None and sw.gbest_cost <= threshold:
            break
        if variant.tag == "PSO":
            moved = pso_step(sw, variant.omega, variant.c1, variant.c2, move_rng)
            sw.velocities = moved.velocities
            candidate = moved.positions
        else:
            if variant.tag == "AWQPSO":
                mbest = weighted_mean_best(sw, variant.alpha_max, variant.alpha_min)
            else:
                mbest = mean_best(sw)
            beta = beta_schedule(t, t_max, variant.beta_hi, variant.beta_lo)
            attractor = local_attractor(sw.pbest, sw.gbest, move_rng)
            candidate = qpso_position_update(sw.positions, attractor, mbest, beta, move_rng, sw.bounds)

        candidate_cost = _evaluate(cost, candidate)
        if variant.tag == "AWQPSO":
            accepted = metropolis_accept_many(candidate_cost - sw.cost, anneal.temperature, accept_rng)
            candidate = np.where(accepted[:, None], candidate, sw.positions)
            candidate_cost = np.where(accepted, candidate_cost, sw.cost)
            anneal = cooling_step(anneal)
        sw.positions = candidate
        sw.cost = candidate_cost
        _update_personal_bests(sw)
        sw.iteration = t + 1
    return sw


def initial_swarm(
    cost: CostFunction,
    population: int,
    bounds: Sequence[Sequence[float]],
    rand: np.random.Generator,
) -> Swarm:
    """Uniform initial swarm inside ``bounds`` with costs evaluated."""
    b = np.asarray(bounds, dtype=np.float64)
    positions = b[:, 0] + rand.random((population, b.shape[0])) * (b[:, 1] - b[:, 0])
    return Swarm.from_positions(positions, _evaluate(cost, positions), bounds=b)

