"""Particle-filter tracking pipeline.

Per frame: memory-guided propagation, likelihood evaluation, an optional
swarm optimization that moves particles towards high likelihood, importance
weighting, posterior-mean estimation, and systematic resampling when the
effective sample size drops below a fraction of the population.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from swarmtrack.core import BoundingBox, Swarm, TargetState, TrackerConfig, as_bounds, clamp_array, rng_stream
from swarmtrack.metrics import TrackReport, frame_rmse
from swarmtrack.observe import (
    ColorReference,
    GaussianObservationModel,
    IntegralImage,
    color_patch_likelihood,
    point_likelihood,
)
from swarmtrack.optim import OptimizerVariant, run_optimizer
from swarmtrack.scenesim import Sequence

# tracker tag -> optimizer variant run inside each frame (None: plain SIR filter)
TRACKERS: dict[str, str | None] = {"PF": None, "PSO-PF": "PSO", "AWQPSO-PF": "AWQPSO"}

MEMORY_DEPTH = 3

# stream ids under (seed, frame, ...)
_INIT, _PROPAGATE, _OPTIMIZE, _RESAMPLE = 0, 1, 2, 3


@dataclass(frozen=True)
class VelocityMemory:
    """Up to three most recent per-frame velocities, most recent last."""

    recent: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self) -> None:
        if len(self.recent) > MEMORY_DEPTH:
            raise ValueError(f"memory holds at most {MEMORY_DEPTH} velocities")
        if not all(np.all(np.isfinite(v)) for v in self.recent):
            raise ValueError("velocities must be finite")

    def push(self, velocity) -> VelocityMemory:
        v = tuple(float(x) for x in np.asarray(velocity).reshape(-1))
        return VelocityMemory((self.recent + (v,))[-MEMORY_DEPTH:])


@dataclass
class FilterState:
    swarm: Swarm
    memory: VelocityMemory
    previous_estimate: TargetState
    frame_index: int = 0


def importance_weights(likelihoods, prior=None) -> tuple[np.ndarray, bool]:
    """Normalized weights proportional to ``prior * likelihood``.

    With no prior (or a uniform one after resampling) the weights are the
    normalized likelihoods. Returns ``(weights, degenerate)``; when every
    product is zero the weights fall back to uniform and ``degenerate`` is set.
    """
    lik = np.asarray(likelihoods, dtype=np.float64)
    if lik.size == 0:
        raise ValueError("no likelihoods")
    if not np.all(np.isfinite(lik)) or np.any(lik < 0):
        raise ValueError("likelihoods must be finite and non-negative")
    raw = lik if prior is None else lik * np.asarray(prior, dtype=np.float64)
    total = raw.sum()
    if total <= 0:
        return np.full(lik.size, 1.0 / lik.size), True
    return raw / total, False


def effective_sample_size(weights) -> float:
    w = np.asarray(weights, dtype=np.float64)
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights not normalized (sum {w.sum()!r})")
    return float(1.0 / np.sum(w * w))


def systematic_indices(weights, rand: np.random.Generator) -> np.ndarray:
    """Ancestor indices from N evenly spaced points with one uniform offset."""
    w = np.asarray(weights, dtype=np.float64)
    n = w.size
    points = rand.random() + np.arange(n)
    cum = np.cumsum(w) * n
    # absorb summation rounding so equal weights map one-to-one for any offset
    snapped = np.rint(cum)
    cum = np.where(np.abs(cum - snapped) < 1e-9, snapped, cum)
    idx = np.searchsorted(cum, points, side="right")
    return np.minimum(idx, n - 1)


def sir_resample(swarm: Swarm, rand: np.random.Generator) -> Swarm:
    idx = systematic_indices(swarm.weights, rand)
    out = swarm.copy()
    out.positions = swarm.positions[idx]
    out.velocities = swarm.velocities[idx]
    out.pbest = swarm.pbest[idx]
    out.pbest_cost = swarm.pbest_cost[idx]
    out.cost = swarm.cost[idx]
    out.weights = np.full(swarm.size, 1.0 / swarm.size)
    return out


def estimate_state(swarm: Swarm) -> np.ndarray:
    """Posterior mean of the weighted particle set."""
    if swarm.size == 0:
        raise ValueError("estimate of an empty swarm")
    return swarm.weights @ swarm.positions


def memory_step_size(memory: VelocityMemory, dim: int = 2, pair_descending: bool = False) -> np.ndarray:
    """Adaptive step size from the last three frame velocities.

    Speed-proportional weights are sorted ascending and paired in order with
    the velocities from most recent to oldest, then doubled; so the smallest
    weight multiplies the latest velocity. ``pair_descending`` reverses the
    pairing. Fewer than three velocities, or all of them zero, give a zero
    step.
    """
    if len(memory.recent) < MEMORY_DEPTH:
        return np.zeros(len(memory.recent[0]) if memory.recent else dim)
    vs = np.asarray(memory.recent, dtype=np.float64)
    speeds = np.linalg.norm(vs, axis=1)
    total = speeds.sum()
    if total == 0:
        return np.zeros(vs.shape[1])
    lam = np.sort(speeds / total)
    if pair_descending:
        lam = lam[::-1]
    newest_first = vs[::-1]
    return 2.0 * (lam[:, None] * newest_first).sum(axis=0)


def propagate(
    positions: np.ndarray,
    v_f: np.ndarray,
    sigma_m: np.ndarray,
    rand: np.random.Generator,
    bounds: np.ndarray | None = None,
) -> np.ndarray:
    """Drift each particle by ``Omega * v_f`` (Omega ~ U(-1, 1) per entry) plus N(0, sigma_m) noise."""
    sigma_m = np.asarray(sigma_m, dtype=np.float64)
    if np.any(sigma_m < 0):
        raise ValueError("diffusion variances must be non-negative")
    omega = rand.uniform(-1.0, 1.0, positions.shape)
    noise = rand.standard_normal(positions.shape) * np.sqrt(sigma_m)
    return clamp_array(positions + omega * np.asarray(v_f) + noise, bounds)


def _likelihood_builder(sequence: Sequence, config: TrackerConfig):
    """Return ``(per-frame likelihood factory, fitness peak)`` for the sequence mode."""
    gt0 = sequence.ground_truth[0]
    if sequence.mode == "point":
        model = GaussianObservationModel(tuple(config.observation_variance))

        def make(k: int) -> Callable[[np.ndarray], np.ndarray]:
            obs = sequence.frames[k]
            return lambda states: point_likelihood(states, obs, model)

        return make, model.peak

    first = IntegralImage(sequence.frames[0])
    means, count = first.window_means(
        np.array([gt0.cx]), np.array([gt0.cy]), np.array([gt0.w]), np.array([gt0.h])
    )
    if count[0] == 0:
        raise ValueError("first-frame annotation lies outside the frame")
    ref = ColorReference(
        reference_color=tuple(float(c) for c in means[0]),
        window=(gt0.w, gt0.h),
        variances=tuple(config.color_variance),
    )

    def make(k: int) -> Callable[[np.ndarray], np.ndarray]:
        integral = first if k == 0 else IntegralImage(sequence.frames[k])
        return lambda states: color_patch_likelihood(states, integral, ref)

    return make, ref.peak


def _search_bounds(sequence: Sequence, config: TrackerConfig) -> np.ndarray:
    if config.search_bounds is not None:
        return as_bounds(config.search_bounds, config.state_dim)
    W, H = sequence.width, sequence.height
    b = [[0.0, float(W)], [0.0, float(H)]]
    if config.box_mode:
        b += [[2.0, float(W)], [2.0, float(H)]]
    return np.asarray(b)


def track_sequence(
    sequence: Sequence,
    tracker: str,
    config: TrackerConfig | None = None,
    observation: str | None = None,
) -> TrackReport:
    """Run one tracker over ``sequence`` and collect per-frame results.

    ``observation`` names the expected observation model (``"raster"`` or
    ``"point"``); it must match the sequence when given.
    """
    config = config or TrackerConfig()
    if tracker not in TRACKERS:
        raise ValueError(f"unknown tracker {tracker!r}; valid tags: {', '.join(TRACKERS)}")
    if len(sequence) < 2:
        raise ValueError("tracking needs at least two frames")
    if observation is not None and observation != sequence.mode:
        raise ValueError(f"{observation} observation model cannot score a {sequence.mode} sequence")

    started = time.perf_counter()
    make_likelihood, f_peak = _likelihood_builder(sequence, config)
    bounds = _search_bounds(sequence, config)
    sigma_m = config.diffusion()
    dim = config.state_dim
    n = config.population
    seed = config.seed
    variant_tag = TRACKERS[tracker]
    variant = OptimizerVariant.from_config(variant_tag, config) if variant_tag else None
    stop_cost = -config.fitness_stop_fraction * f_peak

    gt0 = sequence.ground_truth[0]
    start = np.array([gt0.cx, gt0.cy, gt0.w, gt0.h][:dim])
    init = rng_stream(seed, (0, _INIT))
    positions = clamp_array(start + init.standard_normal((n, dim)) * np.sqrt(sigma_m), bounds)
    state = FilterState(
        swarm=Swarm.from_positions(positions, bounds=bounds),
        memory=VelocityMemory(),
        previous_estimate=TargetState.from_array(start),
    )

    estimates = [state.previous_estimate]
    errors = [frame_rmse(positions, (gt0.cx, gt0.cy), config.rmse_literal)]
    boxes = [BoundingBox(gt0.cx, gt0.cy, gt0.w, gt0.h)]
    iterations = [0]
    degenerate_frames: list[int] = []
    resampled_frames: list[int] = []

    for k in range(1, len(sequence)):
        gt = sequence.ground_truth[k]
        likelihood = make_likelihood(k)
        sw = state.swarm
        v_f = memory_step_size(state.memory, dim, config.pair_descending)
        positions = propagate(sw.positions, v_f, sigma_m, rng_stream(seed, (k, _PROPAGATE)), bounds)
        lik = likelihood(positions)
        iters = 0
        if variant is not None:
            evolved = run_optimizer(
                variant,
                lambda states: -likelihood(states),
                config,
                Swarm.from_positions(positions, -lik, bounds=bounds),
                stream=(k, _OPTIMIZE),
                stop_cost=stop_cost,
            )
            positions = evolved.pbest
            lik = -evolved.pbest_cost
            iters = evolved.iteration

        weights, degenerate = importance_weights(lik, sw.weights)
        sw = Swarm.from_positions(positions, -lik, bounds=bounds, weights=weights)
        est = estimate_state(sw)
        estimate = TargetState.from_array(est)
        if degenerate:
            degenerate_frames.append(k)
        elif effective_sample_size(weights) < config.ess_threshold_fraction * n:
            sw = sir_resample(sw, rng_stream(seed, (k, _RESAMPLE)))
            resampled_frames.append(k)

        estimates.append(estimate)
        errors.append(frame_rmse(positions, (gt.cx, gt.cy), config.rmse_literal))
        if config.box_mode:
            boxes.append(BoundingBox(estimate.x, estimate.y, estimate.w, estimate.h))
        else:
            boxes.append(BoundingBox(estimate.x, estimate.y, gt0.w, gt0.h))
        iterations.append(iters)
        state = FilterState(
            swarm=sw,
            memory=state.memory.push(est - state.previous_estimate.as_array()),
            previous_estimate=estimate,
            frame_index=k,
        )

    elapsed = time.perf_counter() - started
    return TrackReport(
        tracker_tag=tracker,
        seed=seed,
        per_frame_estimates=estimates,
        per_frame_swarm_errors=errors,
        per_frame_boxes=boxes,
        ground_truth=list(sequence.ground_truth),
        wall_clock_seconds=elapsed,
        per_frame_iterations=iterations,
        degenerate_frames=degenerate_frames,
        resampled_frames=resampled_frames,
    )
