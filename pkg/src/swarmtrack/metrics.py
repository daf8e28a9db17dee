"""Tracking quality indices: swarm RMSE, overlap, precision/recall curves, lost targets, FPS."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from swarmtrack.core import BoundingBox, TargetState

REPORT_SCHEMA_VERSION = 1

PRECISION_THRESHOLDS = tuple(float(t) for t in range(0, 51))
RECALL_THRESHOLDS = tuple(round(0.05 * i, 2) for i in range(0, 21))


@dataclass
class TrackReport:
    tracker_tag: str
    seed: int
    per_frame_estimates: list[TargetState]
    per_frame_swarm_errors: list[float]
    per_frame_boxes: list[BoundingBox]
    ground_truth: list[BoundingBox]
    wall_clock_seconds: float
    per_frame_iterations: list[int] = field(default_factory=list)
    degenerate_frames: list[int] = field(default_factory=list)
    resampled_frames: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        n = len(self.per_frame_estimates)
        if len(self.per_frame_swarm_errors) != n or len(self.per_frame_boxes) != n:
            raise ValueError("per-frame lists differ in length")

    @property
    def frames_processed(self) -> int:
        return len(self.per_frame_estimates)

    def center_errors(self) -> list[float]:
        """Distance between the state estimate and the ground-truth center per frame."""
        return [
            math.hypot(e.x - g.cx, e.y - g.cy) for e, g in zip(self.per_frame_estimates, self.ground_truth)
        ]

    def overlaps(self) -> list[float]:
        return [overlap_score(b, g) for b, g in zip(self.per_frame_boxes, self.ground_truth)]

    def to_dict(self, include_timing: bool = True) -> dict[str, Any]:
        frames = []
        for i, (e, err, b) in enumerate(zip(self.per_frame_estimates, self.per_frame_swarm_errors, self.per_frame_boxes)):
            frames.append(
                {
                    "frame": i,
                    "estimate": e.as_array().tolist(),
                    "box": [b.cx, b.cy, b.w, b.h],
                    "swarm_rmse": err,
                    "iterations": self.per_frame_iterations[i] if self.per_frame_iterations else 0,
                }
            )
        out: dict[str, Any] = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "tracker": self.tracker_tag,
            "seed": self.seed,
            "frames_processed": self.frames_processed,
            "sequence_rmse": sequence_rmse(self),
            "degenerate_frames": list(self.degenerate_frames),
            "resampled_frames": list(self.resampled_frames),
            "ground_truth": [[g.cx, g.cy, g.w, g.h] for g in self.ground_truth],
            "frames": frames,
        }
        if include_timing:
            out["wall_clock_seconds"] = self.wall_clock_seconds
            out["fps"] = fps(self.frames_processed, self.wall_clock_seconds)
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TrackReport:
        if data.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {data.get('schema_version')}")
        frames = data["frames"]
        return cls(
            tracker_tag=data["tracker"],
            seed=data["seed"],
            per_frame_estimates=[TargetState.from_array(f["estimate"]) for f in frames],
            per_frame_swarm_errors=[f["swarm_rmse"] for f in frames],
            per_frame_boxes=[BoundingBox(*f["box"]) for f in frames],
            ground_truth=[BoundingBox(*g) for g in data["ground_truth"]],
            wall_clock_seconds=data.get("wall_clock_seconds", float("nan")),
            per_frame_iterations=[f["iterations"] for f in frames],
            degenerate_frames=list(data["degenerate_frames"]),
            resampled_frames=list(data["resampled_frames"]),
        )


def frame_rmse(particle_states: np.ndarray, gt: Sequence[float], literal: bool = False) -> float:
    """Root mean squared center distance of the particles to the ground truth.

    ``literal=True`` takes the root of the summed squares and divides by the
    particle count afterwards.
    """
    pts = np.atleast_2d(np.asarray(particle_states, dtype=np.float64))
    if pts.shape[0] == 0:
        raise ValueError("frame RMSE needs at least one particle")
    sq = np.sum((pts[:, :2] - np.asarray(gt, dtype=np.float64)[:2]) ** 2, axis=1)
    if literal:
        return float(np.sqrt(sq.sum()) / pts.shape[0])
    return float(np.sqrt(sq.mean()))


def sequence_rmse(report: TrackReport) -> float:
    if not report.per_frame_swarm_errors:
        raise ValueError("empty report")
    return float(np.mean(report.per_frame_swarm_errors))


def overlap_score(a: BoundingBox, b: BoundingBox) -> float:
    iw = max(0.0, min(a.x1, b.x1) - max(a.x0, b.x0))
    ih = max(0.0, min(a.y1, b.y1) - max(a.y0, b.y0))
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def precision_curve(frame_errors: Sequence[float], thresholds: Iterable[float] = PRECISION_THRESHOLDS) -> list[tuple[float, float]]:
    errors = np.asarray(frame_errors, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("precision of an empty frame list")
    thresholds = [float(t) for t in thresholds]
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be sorted ascending")
    return [(t, int(np.count_nonzero(errors < t)) / errors.size) for t in thresholds]


def recall_curve(overlaps: Sequence[float], thresholds: Iterable[float] = RECALL_THRESHOLDS) -> list[tuple[float, float]]:
    ov = np.asarray(overlaps, dtype=np.float64)
    if ov.size == 0:
        raise ValueError("recall of an empty frame list")
    if np.any((ov < 0) | (ov > 1)):
        raise ValueError("overlap scores must lie in [0, 1]")
    return [(float(t), int(np.count_nonzero(ov > t)) / ov.size) for t in thresholds]


def lost_targets(frame_errors: Sequence[float], cet: float) -> int:
    if cet <= 0:
        raise ValueError("center error threshold must be positive")
    return int(np.count_nonzero(np.asarray(frame_errors, dtype=np.float64) >= cet))


def fps(frames: int, seconds: float) -> float:
    if frames < 1:
        raise ValueError("need at least one frame")
    if not seconds > 0:
        raise ValueError(f"processing time must be positive, got {seconds}")
    return frames / seconds
