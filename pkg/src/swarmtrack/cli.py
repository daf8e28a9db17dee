"""Command-line entry point: ``simulate``, ``track``, ``bench`` and ``optimize``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from swarmtrack.core import ConfigError, TrackerConfig, load_config, rng_stream
from swarmtrack.filter import TRACKERS, track_sequence
from swarmtrack.metrics import (
    PRECISION_THRESHOLDS,
    RECALL_THRESHOLDS,
    REPORT_SCHEMA_VERSION,
    fps,
    lost_targets,
    precision_curve,
    recall_curve,
)
from swarmtrack.optim import VARIANTS, OptimizerVariant, initial_swarm, run_optimizer
from swarmtrack.scenesim import KINDS, MODES, preset, read_sequence, simulate, write_sequence

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2
BENCH_SCHEMA_VERSION = 1
# spacing of per-scenario seed blocks; trials beyond this would collide
SEED_STRIDE = 10_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; route it to the validation code instead
    def error(self, message: str):  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _atomic_write(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _tracker_config(args: argparse.Namespace) -> TrackerConfig:
    cfg = load_config(args.config)
    return cfg.replace(seed=args.seed) if args.seed is not None else cfg


# -- simulate -----------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    overrides: dict[str, Any] = {"mode": args.mode}
    if args.pixel_noise is not None:
        overrides["pixel_noise_sigma"] = args.pixel_noise
    if args.measurement_noise is not None:
        overrides["measurement_noise_sigma"] = args.measurement_noise
    try:
        scenario = preset(args.kind, args.frames, seed=args.seed or 0, **overrides)
        seq = simulate(scenario)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    try:
        write_sequence(seq, out)
    except OSError as exc:
        print(f"cannot write to {out}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(out)
    return EXIT_OK


# -- track --------------------------------------------------------------------


def report_document(report, config: TrackerConfig, cets: Sequence[float], include_timing: bool, extra=None) -> dict:
    # precision and lost targets are scored on the per-frame swarm RMSE
    errs = report.per_frame_swarm_errors
    doc = report.to_dict(include_timing=include_timing)
    doc["config"] = config.to_dict()
    doc["estimate_center_errors"] = report.center_errors()
    doc["lost_targets"] = {_fmt(float(c)): lost_targets(errs, c) for c in cets}
    doc["precision_curve"] = [list(p) for p in precision_curve(errs)]
    doc["recall_curve"] = [list(p) for p in recall_curve(report.overlaps())]
    if extra:
        doc.update(extra)
    return doc


def cmd_track(args: argparse.Namespace) -> int:
    if args.tracker not in TRACKERS:
        raise UsageError(f"unknown tracker {args.tracker!r}; valid tags: {', '.join(TRACKERS)}")
    config = _tracker_config(args)
    try:
        seq = read_sequence(args.sequence)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read sequence {args.sequence}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        report = track_sequence(seq, args.tracker, config, observation=args.observation)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    doc = report_document(report, config, args.cet, not args.normalize_timing, {"sequence": str(args.sequence)})
    _atomic_write(Path(args.out), _dump_json(doc))
    print(args.out)
    return EXIT_OK


# -- bench --------------------------------------------------------------------


@dataclass(frozen=True)
class BenchPlan:
    trackers: tuple[str, ...] = tuple(TRACKERS)
    scenarios: tuple[str, ...] = ("distractor_cross",)
    trials: int = 30
    cet_values: tuple[float, ...] = (20.0, 30.0)
    seed_base: int = 0
    frames: int = 301
    config: TrackerConfig = field(default_factory=TrackerConfig)
    timing_repeats: int = 1

    def __post_init__(self) -> None:
        bad = [t for t in self.trackers if t not in TRACKERS]
        if bad or not self.trackers:
            raise ValueError(f"unknown trackers {bad}; valid tags: {', '.join(TRACKERS)}")
        bad = [s for s in self.scenarios if s not in KINDS]
        if bad or not self.scenarios:
            raise ValueError(f"unknown scenarios {bad}; valid kinds: {', '.join(KINDS)}")
        if not 0 < self.trials <= SEED_STRIDE:
            raise ValueError(f"trials must lie in [1, {SEED_STRIDE}]")
        if not self.cet_values or any(c <= 0 for c in self.cet_values):
            raise ValueError("CET values must be positive")
        if self.frames < 2:
            raise ValueError("bench sequences need at least two frames")
        if self.timing_repeats < 1:
            raise ValueError("timing_repeats must be positive")

    def trial_seed(self, scenario_index: int, trial: int) -> int:
        return self.seed_base + SEED_STRIDE * scenario_index + trial

    def to_dict(self) -> dict[str, Any]:
        return {
            "trackers": list(self.trackers),
            "scenarios": list(self.scenarios),
            "trials": self.trials,
            "cet_values": list(self.cet_values),
            "seed_base": self.seed_base,
            "frames": self.frames,
            "timing_repeats": self.timing_repeats,
            "config": self.config.to_dict(),
        }


def _cell_path(root: Path, scenario: str, tracker: str, trial: int) -> Path:
    return root / "cells" / scenario / tracker / f"trial_{trial:03d}.json"


def _run_trial(job: tuple[BenchPlan, int, int, str, bool]) -> list[dict]:
    """All trackers of one (scenario, trial) run back to back on one worker so their timings are comparable.

    With ``timing_repeats > 1`` every tracker is re-run in further rounds,
    with the order rotated each round, and its fastest wall-clock time is kept.
    """
    plan, s_index, trial, root, include_timing = job
    kind = plan.scenarios[s_index]
    seed = plan.trial_seed(s_index, trial)
    scenario = preset(kind, plan.frames, seed=seed)
    config = plan.config.replace(seed=seed)
    seq = simulate(scenario)
    reports: dict[str, Any] = {}
    for tracker in plan.trackers:
        try:
            reports[tracker] = track_sequence(seq, tracker, config)
        except Exception as exc:  # recorded per cell; the bench carries on
            reports[tracker] = exc
    if include_timing:
        names = list(plan.trackers)
        for r in range(1, plan.timing_repeats):
            # rotate the run order each round so no tracker always goes first
            for tracker in names[r % len(names) :] + names[: r % len(names)]:
                rep = reports[tracker]
                if not isinstance(rep, Exception):
                    again = track_sequence(seq, tracker, config).wall_clock_seconds
                    rep.wall_clock_seconds = min(rep.wall_clock_seconds, again)

    summaries = []
    for tracker in plan.trackers:
        cell = {"scenario": kind, "tracker": tracker, "trial": trial, "seed": seed}
        report = reports[tracker]
        if isinstance(report, Exception):
            doc = {
                "bench_schema_version": BENCH_SCHEMA_VERSION,
                "scenario": scenario.to_dict(),
                "tracker": tracker,
                "trial": trial,
                "seed": seed,
                "config": config.to_dict(),
                "error": f"{type(report).__name__}: {report}",
            }
            cell.update(ok=False, error=doc["error"])
        else:
            errs = report.per_frame_swarm_errors
            doc = report_document(
                report,
                config,
                plan.cet_values,
                include_timing,
                {"bench_schema_version": BENCH_SCHEMA_VERSION, "scenario": scenario.to_dict(), "trial": trial},
            )
            cell.update(
                ok=True,
                fps=fps(report.frames_processed, report.wall_clock_seconds),
                lost={c: lost_targets(errs, c) for c in plan.cet_values},
                precision=[v for _, v in precision_curve(errs)],
                recall=[v for _, v in recall_curve(report.overlaps())],
            )
        _atomic_write(_cell_path(Path(root), kind, tracker, trial), _dump_json(doc))
        summaries.append(cell)
    return summaries


def run_bench(plan: BenchPlan, out: Path, workers: int = 1, include_timing: bool = True) -> list[dict]:
    jobs = [(plan, s, t, str(out), include_timing) for s in range(len(plan.scenarios)) for t in range(plan.trials)]
    if workers <= 1:
        results = [_run_trial(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial, jobs))
    cells = [c for group in results for c in group]
    write_bundle(plan, cells, out, include_timing)
    return cells


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return math.nan, math.nan
    return float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0


def write_bundle(plan: BenchPlan, cells: list[dict], out: Path, include_timing: bool) -> None:
    _atomic_write(out / "plan.json", _dump_json({"bench_schema_version": BENCH_SCHEMA_VERSION, **plan.to_dict()}))
    failures = [c for c in cells if not c["ok"]]
    _atomic_write(
        out / "failures.json",
        _dump_json([{k: c[k] for k in ("scenario", "tracker", "trial", "seed", "error")} for c in failures]),
    )
    for kind in plan.scenarios:
        rows = []
        curves: dict[str, dict[str, list[float]]] = {"precision": {}, "recall": {}}
        for tracker in plan.trackers:
            done = [c for c in cells if c["scenario"] == kind and c["tracker"] == tracker and c["ok"]]
            row: list[Any] = [tracker, len(done)]
            if include_timing:
                row += [_fmt(v) for v in _mean_std([c["fps"] for c in done])]
            for cet in plan.cet_values:
                lost = [c["lost"][cet] for c in done]
                row += [_fmt(_mean_std(lost)[0]), max(lost, default=0), sum(1 for v in lost if v == 0)]
            rows.append(row)
            for family, thresholds in (("precision", PRECISION_THRESHOLDS), ("recall", RECALL_THRESHOLDS)):
                if not done:
                    continue
                mean = np.mean([c[family] for c in done], axis=0).tolist()
                curves[family][tracker] = mean
                _atomic_write(
                    out / "curves" / f"{family}_{kind}_{tracker}.csv",
                    _csv_text(["threshold", "value"], [[_fmt(t), _fmt(v)] for t, v in zip(thresholds, mean)]),
                )
        header = ["tracker", "trials"]
        if include_timing:
            header += ["fps_mean", "fps_std"]
        for cet in plan.cet_values:
            tag = f"{cet:g}"
            header += [f"lost_cet{tag}_mean", f"lost_cet{tag}_max", f"zero_lost_cet{tag}_trials"]
        _atomic_write(out / f"summary_{kind}.csv", _csv_text(header, rows))
        if include_timing:
            per_trial = [["scenario", "tracker", "trial", "seed", "fps"]]
            for c in cells:
                if c["scenario"] == kind and c["ok"]:
                    per_trial.append([kind, c["tracker"], c["trial"], c["seed"], _fmt(c["fps"])])
            _atomic_write(out / f"fps_{kind}.csv", _csv_text(per_trial[0], per_trial[1:]))
        for family, thresholds, xlabel in (
            ("precision", PRECISION_THRESHOLDS, "center error threshold (px)"),
            ("recall", RECALL_THRESHOLDS, "overlap threshold"),
        ):
            if curves[family]:
                svg = curve_svg(f"{family} ({kind})", xlabel, family, thresholds, curves[family])
                _atomic_write(out / "plots" / f"{family}_{kind}.svg", svg)


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def curve_svg(title: str, xlabel: str, ylabel: str, xs: Sequence[float], series: dict[str, Sequence[float]]) -> str:
    """Plain SVG line plot: axes with ticks, one polyline per series and a legend."""
    width, height = 480, 360
    left, right, top, bottom = 60, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom
    x_lo, x_hi = float(min(xs)), float(max(xs))
    span = x_hi - x_lo or 1.0

    def px(x: float) -> float:
        return left + (x - x_lo) / span * pw

    def py(y: float) -> float:
        return top + (1.0 - y) * ph

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for i in range(6):
        fx = x_lo + span * i / 5
        lines.append(f'<line x1="{px(fx):.1f}" y1="{top + ph}" x2="{px(fx):.1f}" y2="{top + ph + 4}" stroke="black"/>')
        lines.append(f'<text x="{px(fx):.1f}" y="{top + ph + 16}" text-anchor="middle" font-size="10">{fx:g}</text>')
        fy = i / 5
        lines.append(f'<line x1="{left - 4}" y1="{py(fy):.1f}" x2="{left}" y2="{py(fy):.1f}" stroke="black"/>')
        lines.append(f'<text x="{left - 6}" y="{py(fy) + 3:.1f}" text-anchor="end" font-size="10">{fy:.1f}</text>')
    lines.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="12">{xlabel}</text>')
    lines.append(
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{ylabel}</text>'
    )
    for i, (name, ys) in enumerate(series.items()):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        lines.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = top + 12 + 16 * i
        lines.append(f'<line x1="{left + pw - 110}" y1="{ly}" x2="{left + pw - 90}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        lines.append(f'<text x="{left + pw - 85}" y="{ly + 4}" font-size="11">{name}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_bench(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.population is not None:
        config = config.replace(population=args.population)
    try:
        plan = BenchPlan(
            trackers=tuple(args.trackers),
            scenarios=tuple(args.scenarios),
            trials=args.trials,
            cet_values=tuple(float(c) for c in args.cet),
            seed_base=args.seed or 0,
            frames=args.frames,
            config=config,
            timing_repeats=args.timing_repeats,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    cells = run_bench(plan, out, args.workers, include_timing=not args.normalize_timing)
    failed = [c for c in cells if not c["ok"]]
    for c in failed:
        print(f"cell {c['scenario']}/{c['tracker']}/trial {c['trial']} failed: {c['error']}", file=sys.stderr)
    print(out)
    return EXIT_RUNTIME if failed else EXIT_OK


# -- optimize -----------------------------------------------------------------


def sphere(x: np.ndarray) -> np.ndarray:
    return np.sum(x * x, axis=1)


def rastrigin(x: np.ndarray) -> np.ndarray:
    return 10.0 * x.shape[1] + np.sum(x * x - 10.0 * np.cos(2 * np.pi * x), axis=1)


def constant(x: np.ndarray) -> np.ndarray:
    return np.ones(len(x))


FUNCTIONS = {"sphere": sphere, "rastrigin": rastrigin, "constant": constant}


def optimize_runs(
    variant: str,
    function: str,
    runs: int,
    config: TrackerConfig,
    dim: int = 2,
    half_width: float = 5.12,
    threshold: float = 1e-3,
) -> dict[str, Any]:
    """Repeated seeded optimizer runs on a benchmark function with its optimum at the origin."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; valid tags: {', '.join(VARIANTS)}")
    if function not in FUNCTIONS:
        raise ValueError(f"unknown function {function!r}; valid tags: {', '.join(FUNCTIONS)}")
    cost = FUNCTIONS[function]
    bounds = [(-half_width, half_width)] * dim
    opt = OptimizerVariant.from_config(variant, config)
    records = []
    for r in range(runs):
        seed = config.seed + r
        start = initial_swarm(cost, config.population, bounds, rng_stream(seed, (0,)))
        final = run_optimizer(opt, cost, config.replace(seed=seed), start, stream=(1,))
        records.append(
            {"run": r, "seed": seed, "initial_best": start.gbest_cost, "best_cost": final.gbest_cost,
             "best_position": final.gbest.tolist(), "iterations": final.iteration}
        )
    best = np.array([rec["best_cost"] for rec in records])
    qs = (0.0, 0.25, 0.5, 0.75, 1.0)
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "variant": variant,
        "function": function,
        "dim": dim,
        "runs": runs,
        "threshold": threshold,
        "config": config.to_dict(),
        "quantiles": {f"{q:g}": float(np.quantile(best, q)) for q in qs},
        "success_rate": float(np.mean(best < threshold)),
        "records": records,
    }


def cmd_optimize(args: argparse.Namespace) -> int:
    config = _tracker_config(args)
    overrides = {}
    if args.population is not None:
        overrides["population"] = args.population
    if args.t_max is not None:
        overrides["t_max"] = args.t_max
    try:
        config = config.replace(**overrides)
        doc = optimize_runs(args.variant, args.function, args.runs, config, args.dim, args.half_width, args.threshold)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _atomic_write(Path(args.out), _dump_json(doc))
    print(f"{args.variant} {args.function}: success rate {doc['success_rate']:.3f}, median best {doc['quantiles']['0.5']:.3e}")
    return EXIT_OK


# -- wiring -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed (bench: seed base)")
    common.add_argument("--config", default=None, help="tracker config JSON")
    common.add_argument("--out", required=True, help="output file or directory")

    parser = _Parser(prog="swarmtrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="render a synthetic sequence to disk")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--frames", type=_positive_int, default=301)
    p.add_argument("--mode", choices=MODES, default="raster")
    p.add_argument("--pixel-noise", type=float, default=None)
    p.add_argument("--measurement-noise", type=float, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", parents=[common], help="run one tracker on a sequence directory")
    p.add_argument("--sequence", required=True)
    p.add_argument("--tracker", required=True, help=f"one of {', '.join(TRACKERS)}")
    p.add_argument("--observation", choices=MODES, default=None)
    p.add_argument("--cet", type=float, nargs="+", default=[20.0, 30.0])
    p.add_argument("--normalize-timing", action="store_true", help="omit wall-clock fields")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("bench", parents=[common], help="tracker x scenario x trial benchmark")
    p.add_argument("--trackers", type=_csv_list, default=list(TRACKERS))
    p.add_argument("--scenarios", type=_csv_list, default=["distractor_cross"])
    p.add_argument("--trials", type=_positive_int, default=30)
    p.add_argument("--frames", type=_positive_int, default=301)
    p.add_argument("--population", type=_positive_int, default=None)
    p.add_argument("--cet", type=float, nargs="+", default=[20.0, 30.0])
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--timing-repeats", type=_positive_int, default=1, help="keep the fastest of this many timed runs")
    p.add_argument("--normalize-timing", action="store_true", help="omit wall-clock fields for byte comparison")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("optimize", parents=[common], help="optimizer sanity runs on benchmark functions")
    p.add_argument("--variant", required=True, help=f"one of {', '.join(VARIANTS)}")
    p.add_argument("--function", required=True, help=f"one of {', '.join(FUNCTIONS)}")
    p.add_argument("--runs", type=_positive_int, default=100)
    p.add_argument("--dim", type=_positive_int, default=2)
    p.add_argument("--population", type=_positive_int, default=50)
    p.add_argument("--t-max", type=_positive_int, default=None)
    p.add_argument("--half-width", type=float, default=5.12)
    p.add_argument("--threshold", type=float, default=1e-3)
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
