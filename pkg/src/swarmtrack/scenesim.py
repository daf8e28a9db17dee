"""Scripted synthetic scenes with exact ground truth.

A scene is one box-shaped target on a flat background, optionally joined by
a second box of similar color that crosses its path, an occluder that covers
it for a frame interval, or a linear change of scale. Raster scenes render
``H x W x 3`` RGB8 frames; point scenes emit a noisy center measurement per
frame.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from swarmtrack.core import BoundingBox, pixel_span, rng_stream

SCHEMA_VERSION = 1

KINDS = ("constant_velocity", "sinusoidal", "abrupt_turn", "distractor_cross", "occlusion", "scale_change")
MODES = ("raster", "point")

Color = tuple[int, int, int]


@dataclass(frozen=True)
class Scenario:
    kind: str = "constant_velocity"
    frame_count: int = 301
    frame_size: tuple[int, int] = (320, 240)
    mode: str = "raster"
    start: tuple[float, float] = (40.0, 120.0)
    velocity: tuple[float, float] = (0.8, 0.0)
    box: tuple[float, float] = (20.0, 30.0)
    target_color: Color = (200, 40, 40)
    background_color: Color = (60, 90, 60)
    distractor_color: Color = (185, 55, 50)
    occluder_color: Color = (90, 90, 160)
    pixel_noise_sigma: float = 8.0
    measurement_noise_sigma: float = 1.0
    event_frames: tuple[int, ...] = ()
    distractor_velocity: tuple[float, float] = (0.0, 2.0)
    occlusion_length: int = 10
    amplitude: float = 40.0
    period: float = 100.0
    scale_factor: float = 1.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.frame_count < 1:
            raise ValueError("frame_count must be positive")
        if self.frame_size[0] < 1 or self.frame_size[1] < 1:
            raise ValueError("frame size must be positive")
        if any(not 0 <= e < self.frame_count for e in self.event_frames):
            raise ValueError(f"event frames {self.event_frames} outside [0, {self.frame_count})")
        if self.pixel_noise_sigma < 0 or self.measurement_noise_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.kind in ("abrupt_turn", "distractor_cross", "occlusion") and not self.event_frames:
            raise ValueError(f"{self.kind} needs an event frame")

    def to_dict(self) -> dict[str, Any]:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Scenario:
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - fields
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in data.items()})

    def replace(self, **changes: Any) -> Scenario:
        return dataclasses.replace(self, **changes)


def preset(kind: str, frame_count: int = 301, seed: int = 0, **overrides: Any) -> Scenario:
    """A scenario of ``kind`` whose scripted path stays inside the frame for ``frame_count`` frames."""
    span = max(frame_count - 1, 1)
    mid = frame_count // 2
    # sweep 240 px horizontally over the sequence
    speed = 240.0 / span
    base: dict[str, Any] = dict(
        kind=kind, frame_count=frame_count, seed=seed, start=(40.0, 120.0), velocity=(speed, 0.0)
    )
    if kind == "abrupt_turn":
        base.update(velocity=(2 * speed, 0.0), event_frames=(mid,))
    elif kind == "distractor_cross":
        # fixed target speed, frame widened to fit; a slow near-twin box sits on the path
        cross_speed = 2.4
        base.update(
            frame_size=(int(math.ceil(80 + cross_speed * span)), 240),
            velocity=(cross_speed, 0.0),
            event_frames=(mid,),
            distractor_velocity=(1.2, 0.3),
            distractor_color=(192, 48, 45),
            pixel_noise_sigma=20.0,
        )
    elif kind == "occlusion":
        base.update(event_frames=(mid,), occlusion_length=max(1, frame_count // 30))
    elif kind == "sinusoidal":
        base.update(amplitude=40.0, period=max(span / 3, 1.0))
    elif kind == "scale_change":
        base.update(scale_factor=1.5)
    base.update(overrides)
    return Scenario(**base)


@dataclass(frozen=True)
class Trajectory:
    target: list[BoundingBox]
    distractor: list[BoundingBox] | None = None
    occluded: tuple[bool, ...] = ()

    def __len__(self) -> int:
        return len(self.target)


def generate_trajectory(scenario: Scenario) -> Trajectory:
    """Script the target path (and distractor / occlusion events) frame by frame."""
    s = scenario
    k = np.arange(s.frame_count, dtype=np.float64)
    x0, y0 = s.start
    vx, vy = s.velocity
    cx = x0 + k * vx
    cy = y0 + k * vy
    w = np.full(s.frame_count, float(s.box[0]))
    h = np.full(s.frame_count, float(s.box[1]))
    distractor = None
    occluded = [False] * s.frame_count

    if s.kind == "sinusoidal":
        cy = y0 + s.amplitude * np.sin(2 * np.pi * k / s.period)
    elif s.kind == "abrupt_turn":
        e = s.event_frames[0]
        after = k > e
        cx = np.where(after, x0 + e * vx - (k - e) * vx, cx)
        cy = np.where(after, y0 + e * vy - (k - e) * vy, cy)
    elif s.kind == "distractor_cross":
        e = s.event_frames[0]
        dvx, dvy = s.distractor_velocity
        dx = cx[e] + (k - e) * dvx
        dy = cy[e] + (k - e) * dvy
        distractor = [BoundingBox(float(a), float(b), s.box[0], s.box[1]) for a, b in zip(dx, dy)]
    elif s.kind == "occlusion":
        e = s.event_frames[0]
        for i in range(e, min(e + s.occlusion_length, s.frame_count)):
            occluded[i] = True
    elif s.kind == "scale_change":
        scale = 1.0 + (s.scale_factor - 1.0) * k / max(s.frame_count - 1, 1)
        w = w * scale
        h = h * scale

    boxes = [BoundingBox(float(a), float(b), float(c), float(d)) for a, b, c, d in zip(cx, cy, w, h)]
    W, H = s.frame_size
    for i, b in enumerate(boxes):
        if b.x0 < 0 or b.y0 < 0 or b.x1 > W or b.y1 > H:
            raise ValueError(f"target leaves the {W}x{H} frame at frame {i}: {b}")
    return Trajectory(target=boxes, distractor=distractor, occluded=tuple(occluded))


@dataclass
class Sequence:
    frames: list[np.ndarray]
    ground_truth: list[BoundingBox]
    mode: str
    width: int
    height: int
    scenario: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.frames) != len(self.ground_truth):
            raise ValueError("frames and ground truth differ in length")

    def __len__(self) -> int:
        return len(self.frames)


def _paint(frame: np.ndarray, box: BoundingBox, color: Color) -> None:
    H, W = frame.shape[:2]
    x0, x1 = pixel_span(box.x0, box.x1, W)
    y0, y1 = pixel_span(box.y0, box.y1, H)
    frame[int(y0) : int(y1), int(x0) : int(x1)] = color


def render_sequence(scenario: Scenario, trajectory: Trajectory | None = None) -> Sequence:
    if trajectory is None:
        trajectory = generate_trajectory(scenario)
    s = scenario
    W, H = s.frame_size
    rand = rng_stream(s.seed, (0x5CE,))
    frames = []
    for i, box in enumerate(trajectory.target):
        if s.mode == "point":
            obs = np.array([box.cx, box.cy])
            if s.measurement_noise_sigma > 0:
                obs = obs + rand.normal(0.0, s.measurement_noise_sigma, 2)
            frames.append(obs)
            continue
        frame = np.empty((H, W, 3), dtype=np.uint8)
        frame[:] = s.background_color
        _paint(frame, box, s.target_color)
        if trajectory.distractor is not None:
            _paint(frame, trajectory.distractor[i], s.distractor_color)
        if trajectory.occluded and trajectory.occluded[i]:
            _paint(frame, box, s.occluder_color)
        if s.pixel_noise_sigma > 0:
            noisy = frame + rand.normal(0.0, s.pixel_noise_sigma, frame.shape)
            frame = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
        frames.append(frame)
    return Sequence(
        frames=frames,
        ground_truth=list(trajectory.target),
        mode=s.mode,
        width=W,
        height=H,
        scenario=s.to_dict(),
    )


def simulate(scenario: Scenario) -> Sequence:
    return render_sequence(scenario, generate_trajectory(scenario))


def write_sequence(seq: Sequence, out_dir: str | Path) -> Path:
    """Write manifest, per-frame records and ground truth under ``out_dir``.

    Raster frames go to ``frames/frame_NNNNNN.rgb`` as raw row-major RGB8;
    point observations to ``observations.txt`` as ``frame_index,x,y`` lines;
    ground truth to ``gt.txt`` as ``frame_index,cx,cy,w,h`` lines.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "mode": seq.mode,
        "width": seq.width,
        "height": seq.height,
        "frame_count": len(seq),
        "scenario": seq.scenario,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if seq.mode == "raster":
        frame_dir = out / "frames"
        frame_dir.mkdir(exist_ok=True)
        for i, frame in enumerate(seq.frames):
            (frame_dir / f"frame_{i:06d}.rgb").write_bytes(np.ascontiguousarray(frame, dtype=np.uint8).tobytes())
    else:
        lines = [f"{i},{float(o[0])!r},{float(o[1])!r}" for i, o in enumerate(seq.frames)]
        (out / "observations.txt").write_text("\n".join(lines) + "\n")
    gt_lines = [f"{i},{b.cx!r},{b.cy!r},{b.w!r},{b.h!r}" for i, b in enumerate(seq.ground_truth)]
    (out / "gt.txt").write_text("\n".join(gt_lines) + "\n")
    return out


def read_sequence(path: str | Path) -> Sequence:
    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text())
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported sequence schema {manifest.get('schema_version')}")
    n, W, H, mode = manifest["frame_count"], manifest["width"], manifest["height"], manifest["mode"]
    gt = []
    for line in (root / "gt.txt").read_text().splitlines():
        _, cx, cy, w, h = line.split(",")
        gt.append(BoundingBox(float(cx), float(cy), float(w), float(h)))
    if mode == "raster":
        frames = []
        for i in range(n):
            raw = (root / "frames" / f"frame_{i:06d}.rgb").read_bytes()
            frames.append(np.frombuffer(raw, dtype=np.uint8).reshape(H, W, 3))
    elif mode == "point":
        frames = []
        for line in (root / "observations.txt").read_text().splitlines():
            _, x, y = line.split(",")
            frames.append(np.array([float(x), float(y)]))
    else:
        raise ValueError(f"unknown sequence mode {mode!r}")
    if len(frames) != n or len(gt) != n:
        raise ValueError(f"sequence at {root} is incomplete: {len(frames)} frames, {len(gt)} gt lines, manifest says {n}")
    return Sequence(frames=frames, ground_truth=gt, mode=mode, width=W, height=H, scenario=manifest["scenario"])
