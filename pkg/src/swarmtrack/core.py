"""Shared domain types, tracker configuration, bounds handling and seeded streams."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

Bounds = Sequence[Sequence[float]]

_SEED_MASK = (1 << 64) - 1


class ConfigError(ValueError):
    """Raised for malformed configuration values or files."""


@dataclass(frozen=True)
class TargetState:
    """Target position in frame coordinates, with optional box extent."""

    x: float
    y: float
    w: float | None = None
    h: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite target position ({self.x}, {self.y})")
        if (self.w is None) != (self.h is None):
            raise ValueError("w and h must be given together")
        if self.w is not None and not (self.w > 0 and self.h > 0):
            raise ValueError(f"box extent must be positive, got {self.w}x{self.h}")

    @property
    def has_box(self) -> bool:
        return self.w is not None

    def as_array(self) -> np.ndarray:
        if self.has_box:
            return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)
        return np.array([self.x, self.y], dtype=np.float64)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> TargetState:
        values = [float(v) for v in values]
        if len(values) == 2:
            return cls(values[0], values[1])
        if len(values) == 4:
            return cls(*values)
        raise ValueError(f"state vectors have 2 or 4 entries, got {len(values)}")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box given by its center and extent."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w < 0 or self.h < 0:
            raise ValueError(f"box extent must be non-negative, got {self.w}x{self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x0(self) -> float:
        return self.cx - self.w / 2

    @property
    def y0(self) -> float:
        return self.cy - self.h / 2

    @property
    def x1(self) -> float:
        return self.cx + self.w / 2

    @property
    def y1(self) -> float:
        return self.cy + self.h / 2

    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)


@dataclass(frozen=True)
class Particle:
    """A single candidate state with its weight and optimizer bookkeeping."""

    state: TargetState
    personal_best: TargetState
    personal_best_cost: float
    velocity: tuple[float, ...] = ()
    weight: float = 0.0

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ValueError(f"negative particle weight {self.weight}")


@dataclass
class Swarm:
    """Particle population stored column-wise.

    ``positions``, ``velocities`` and ``pbest`` are ``(N, d)`` arrays; ``cost``
    holds the cost at the current positions and ``pbest_cost`` the best cost
    each particle has seen. The global best is the minimum personal best,
    taken in index order so ties resolve to the lowest index.
    """

    positions: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray
    pbest: np.ndarray
    pbest_cost: np.ndarray
    cost: np.ndarray
    gbest: np.ndarray
    gbest_cost: float
    iteration: int = 0
    bounds: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.positions.ndim != 2 or self.positions.shape[0] == 0:
            raise ValueError("a swarm needs at least one particle")

    @classmethod
    def from_positions(
        cls,
        positions: np.ndarray,
        costs: np.ndarray | None = None,
        bounds: Bounds | None = None,
        weights: np.ndarray | None = None,
    ) -> Swarm:
        positions = np.array(positions, dtype=np.float64, ndmin=2)
        n = positions.shape[0]
        if n == 0:
            raise ValueError("a swarm needs at least one particle")
        if costs is None:
            costs = np.full(n, np.inf)
        costs = np.asarray(costs, dtype=np.float64).copy()
        if weights is None:
            weights = np.full(n, 1.0 / n)
        best = int(np.argmin(costs))
        return cls(
            positions=positions,
            velocities=np.zeros_like(positions),
            weights=np.asarray(weights, dtype=np.float64).copy(),
            pbest=positions.copy(),
            pbest_cost=costs.copy(),
            cost=costs,
            gbest=positions[best].copy(),
            gbest_cost=float(costs[best]),
            bounds=None if bounds is None else as_bounds(bounds, positions.shape[1]),
        )

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def global_best(self) -> TargetState:
        return TargetState.from_array(self.gbest)

    def copy(self) -> Swarm:
        return Swarm(
            positions=self.positions.copy(),
            velocities=self.velocities.copy(),
            weights=self.weights.copy(),
            pbest=self.pbest.copy(),
            pbest_cost=self.pbest_cost.copy(),
            cost=self.cost.copy(),
            gbest=self.gbest.copy(),
            gbest_cost=self.gbest_cost,
            iteration=self.iteration,
            bounds=self.bounds,
        )

    def refresh_global_best(self) -> None:
        best = int(np.argmin(self.pbest_cost))
        self.gbest = self.pbest[best].copy()
        self.gbest_cost = float(self.pbest_cost[best])

    def particles(self) -> list[Particle]:
        return [
            Particle(
                state=TargetState.from_array(self.positions[i]),
                personal_best=TargetState.from_array(self.pbest[i]),
                personal_best_cost=float(self.pbest_cost[i]),
                velocity=tuple(float(v) for v in self.velocities[i]),
                weight=float(self.weights[i]),
            )
            for i in range(self.size)
        ]


def as_bounds(bounds: Bounds, dim: int | None = None) -> np.ndarray:
    """Validate per-dimension ``[lo, hi]`` pairs and return them as a ``(d, 2)`` array."""
    arr = np.asarray(bounds, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"bounds must be a sequence of [lo, hi] pairs, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"expected {dim} bound pairs, got {arr.shape[0]}")
    if not np.all(arr[:, 0] < arr[:, 1]):
        raise ValueError(f"malformed bounds (lo >= hi): {arr.tolist()}")
    return arr


def clamp_array(values: np.ndarray, bounds: np.ndarray | None) -> np.ndarray:
    if bounds is None:
        return values
    return np.clip(values, bounds[:, 0], bounds[:, 1])


def clamp_state(s: TargetState, bounds: Bounds) -> TargetState:
    """Project each coordinate of ``s`` into its interval."""
    values = s.as_array()
    arr = as_bounds(bounds, len(values))
    return TargetState.from_array(clamp_array(values, arr))


def pixel_span(lo: np.ndarray | float, hi: np.ndarray | float, limit: int) -> tuple[np.ndarray, np.ndarray]:
    """Half-open integer pixel range ``[a, b)`` whose pixel centers fall in ``[lo, hi)``.

    Shared by the renderer and the color likelihood so a window placed on a
    ground-truth box covers exactly the painted pixels.
    """
    a = np.clip(np.floor(np.asarray(lo, dtype=np.float64) + 0.5), 0, limit).astype(np.int64)
    b = np.clip(np.floor(np.asarray(hi, dtype=np.float64) + 0.5), 0, limit).astype(np.int64)
    return a, np.maximum(a, b)


def rng_stream(seed: int, stream_id: int | Sequence[int] = 0) -> np.random.Generator:
    """Return a reproducible counter-based generator keyed on ``(seed, stream_id)``.

    ``stream_id`` may be a tuple such as ``(frame, stage)``; every distinct key
    gives an independent Philox stream.
    """
    ids = [stream_id] if isinstance(stream_id, (int, np.integer)) else list(stream_id)
    entropy = [int(seed) & _SEED_MASK] + [int(i) & _SEED_MASK for i in ids]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class TrackerConfig:
    population: int = 300
    c1: float = 2.05
    c2: float = 2.05
    omega: float = 0.5
    t_max: int = 50
    t0: float = 100.0
    beta_hi: float = 0.9
    beta_lo: float = 0.5
    fitness_stop_fraction: float = 0.95
    motion_diffusion: tuple[float, ...] = (16.0, 16.0)
    search_bounds: tuple[tuple[float, float], ...] | None = None
    seed: int = 0
    ess_threshold_fraction: float = 0.5
    alpha_max: float = 1.5
    alpha_min: float = 0.5
    box_mode: bool = False
    pair_descending: bool = False
    rmse_literal: bool = False
    color_variance: tuple[float, float, float] = (400.0, 400.0, 400.0)
    observation_variance: tuple[float, float] = (9.0, 9.0)
    cost_threshold: float | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.population < 1:
            raise ConfigError("population must be a positive integer")
        if self.t_max < 1:
            raise ConfigError("t_max must be a positive integer")
        if not self.beta_hi > self.beta_lo:
            raise ConfigError("beta_hi must exceed beta_lo")
        if not 0 < self.fitness_stop_fraction <= 1:
            raise ConfigError("fitness_stop_fraction must lie in (0, 1]")
        if not 0 < self.ess_threshold_fraction <= 1:
            raise ConfigError("ess_threshold_fraction must lie in (0, 1]")
        if not self.alpha_max >= self.alpha_min > 0:
            raise ConfigError("need alpha_max >= alpha_min > 0")
        if self.t0 <= 0:
            raise ConfigError("t0 must be positive")
        if any(v < 0 for v in self.motion_diffusion):
            raise ConfigError("motion_diffusion variances must be non-negative")
        if any(v <= 0 for v in self.color_variance) or any(v <= 0 for v in self.observation_variance):
            raise ConfigError("observation variances must be positive")
        if self.search_bounds is not None:
            try:
                as_bounds(self.search_bounds)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    @property
    def state_dim(self) -> int:
        return 4 if self.box_mode else 2

    def diffusion(self) -> np.ndarray:
        """Per-dimension motion variances, padded for box mode."""
        sigma = list(self.motion_diffusion)
        if self.box_mode and len(sigma) == 2:
            sigma += [1.0, 1.0]
        if len(sigma) != self.state_dim:
            raise ConfigError(
                f"motion_diffusion needs {self.state_dim} entries, got {len(self.motion_diffusion)}"
            )
        return np.asarray(sigma, dtype=np.float64)

    def replace(self, **changes: Any) -> TrackerConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "extra":
                continue
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[f.name] = value
        return out

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> TrackerConfig:
        known = {f.name for f in dataclasses.fields(cls)} - {"extra"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs: dict[str, Any] = {}
        for key, value in data.items():
            if key == "search_bounds" and value is not None:
                value = tuple((float(lo), float(hi)) for lo, hi in value)
            elif key in ("motion_diffusion", "color_variance", "observation_variance"):
                value = tuple(float(v) for v in value)
            kwargs[key] = value
        return cls(**kwargs)


def load_config(path: str | Path | None = None) -> TrackerConfig:
    """Read a JSON config file; missing fields take their defaults."""
    if path is None:
        return TrackerConfig()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return TrackerConfig.from_mapping(data)
