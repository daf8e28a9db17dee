"""Particle-filter tracking with PSO and annealed weighted QPSO resampling."""

from swarmtrack.core import (
    BoundingBox,
    ConfigError,
    Particle,
    Swarm,
    TargetState,
    TrackerConfig,
    clamp_state,
    load_config,
    rng_stream,
)

__all__ = [
    "BoundingBox",
    "ConfigError",
    "Particle",
    "Swarm",
    "TargetState",
    "TrackerConfig",
    "clamp_state",
    "load_config",
    "rng_stream",
]

__version__ = "0.1.0"
