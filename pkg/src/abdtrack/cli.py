"""Command-line entry points: track, eval, bench, anticipate, emit-facts.

A config file may hold the same keys as the threshold flags, one
``key = value`` per line with ``#`` comments; explicit flags win.
Exit codes: 0 success, 1 runtime/parse failure, 2 usage or missing input.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

from .abduction import Thresholds, emit_facts
from .anticipation import (
    anticipate_unhide,
    engine_views,
    format_anticipation,
    format_position,
    format_warning,
    warnings as compute_warnings,
)
from .io import (
    explanation_to_boxes,
    parse_kitti,
    parse_mot,
    parse_mot_tracks,
    write_events,
    write_report,
    write_tracks,
)
from .metrics import evaluate, format_report
from .synth import ScenarioConfig, generate
from .tracker import AbductionEngine, EngineConfig

_THRESHOLD_KEYS = {
    "iou_thresh": float,
    "conf_thresh_assign": int,
    "conf_thresh_resume": int,
    "conf_thresh_new_track": int,
    "size_threshold": float,
    "max_halted_age": int,
    "anticipation_threshold": int,
    "anticipation_horizon": int,
    "fov_margin": float,
}


def _load_config_file(path: str) -> dict:
    out: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _THRESHOLD_KEYS and key != "frame_geom":
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _build_thresholds(args: argparse.Namespace) -> Thresholds:
    values: dict = {}
    if getattr(args, "config", None):
        for key, raw in _load_config_file(args.config).items():
            if key in _THRESHOLD_KEYS:
                values[key] = _THRESHOLD_KEYS[key](raw)
    flag_map = {
        "iou_thresh": "iou_thresh",
        "conf_assign": "conf_thresh_assign",
        "conf_resume": "conf_thresh_resume",
        "conf_new": "conf_thresh_new_track",
        "size_thresh": "size_threshold",
        "max_halted_age": "max_halted_age",
        "anticipation_threshold": "anticipation_threshold",
        "horizon": "anticipation_horizon",
    }
    for flag, key in flag_map.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    return Thresholds(**values)


def _parse_geom(text: str) -> tuple[float, float]:
    w, h = text.lower().split("x")
    return float(w), float(h)


def _read_stream(args: argparse.Namespace):
    path = Path(args.input)
    if not path.exists():
        print(f"error: input file not found: {path}", file=sys.stderr)
        raise SystemExit(2)
    text = path.read_text()
    if args.format == "kitti":
        classes = set(args.classes.split(",")) if args.classes else None
        return parse_kitti(text, classes)
    return parse_mot(text)


def _engine_config(args: argparse.Namespace) -> EngineConfig:
    geom = None
    if getattr(args, "config", None):
        raw = _load_config_file(args.config).get("frame_geom")
        if raw:
            geom = _parse_geom(raw)
    if getattr(args, "frame_geom", None):
        geom = _parse_geom(args.frame_geom)
    if geom is None:
        geom = (1242.0, 375.0)
    return EngineConfig(thresholds=_build_thresholds(args), frame_geom=geom)


def _run_engine(args: argparse.Namespace, collect_anticipations: bool = False):
    stream = _read_stream(args)
    config = _engine_config(args)
    engine = AbductionEngine(config)
    facts_dir = getattr(args, "emit_facts", None)
    if facts_dir:
        Path(facts_dir).mkdir(parents=True, exist_ok=True)
    anticipation_blocks: list[list[str]] = []
    for frame, dets in stream.frames:
        engine.step(frame, dets)
        if facts_dir:
            Path(facts_dir, f"frame_{frame:06d}.lp").write_text(emit_facts(engine.last_spec))
        if collect_anticipations:
            views, hidden = engine_views(engine)
            ants = anticipate_unhide(
                views, hidden, frame, horizon=config.thresholds.anticipation_horizon
            )
            block: list[str] = []
            for a in ants:
                block.append(format_anticipation(a))
                block.append(format_position(a))
            for w in compute_warnings(
                ants, frame, config.frame_geom, config.thresholds.anticipation_threshold
            ):
                block.append(format_warning(w))
            if block:
                anticipation_blocks.append(block)
    exp = engine.finalize()
    return engine, exp, anticipation_blocks


def _print_latency(engine: AbductionEngine) -> None:
    totals = [s.total_ms for s in engine.latencies]
    if not totals:
        return
    mean = statistics.fmean(totals)
    p95 = sorted(totals)[min(len(totals) - 1, int(0.95 * len(totals)))]
    fps = 1000.0 / mean if mean > 0 else float("inf")
    print(f"frames: {len(totals)}  mean: {mean:.2f} ms  p95: {p95:.2f} ms  fps: {fps:.1f}")


def cmd_track(args: argparse.Namespace) -> int:
    engine, exp, _ = _run_engine(args)
    if args.out_tracks:
        Path(args.out_tracks).write_text(write_tracks(exp))
    if args.out_events:
        Path(args.out_events).write_text(write_events(exp))
    if args.out_report:
        Path(args.out_report).write_text(write_report(exp))
    if args.latency_csv:
        rows = ["frame,solve_ms,total_ms"] + [
            f"{s.frame},{s.solve_ms:.4f},{s.total_ms:.4f}" for s in engine.latencies
        ]
        Path(args.latency_csv).write_text("\n".join(rows) + "\n")
    if args.gt:
        if not Path(args.gt).exists():
            print(f"error: file not found: {args.gt}", file=sys.stderr)
            return 2
        gt = parse_mot_tracks(Path(args.gt).read_text())
        report = evaluate(gt, explanation_to_boxes(exp), match_iou=args.match_iou)
        print(format_report(report, name=Path(args.input).stem))
    _print_latency(engine)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    for p in (args.gt, args.hyp):
        if not Path(p).exists():
            print(f"error: file not found: {p}", file=sys.stderr)
            return 2
    gt = parse_mot_tracks(Path(args.gt).read_text())
    hyp = parse_mot_tracks(Path(args.hyp).read_text())
    report = evaluate(gt, hyp, match_iou=args.match_iou)
    if args.json:
        print(json.dumps(report.to_dict(), indent=2))
    else:
        print(format_report(report, name=Path(args.hyp).stem))
    return 0


_SCENARIO_KEYS = {
    "n_frames": int,
    "overlap_fraction": float,
    "drop_prob": float,
    "jitter_sigma": float,
    "spurious_rate": float,
    "seed": int,
}


def _scenario_overrides(path: str) -> dict:
    out: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCENARIO_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown scenario key {key!r}")
        out[key] = _SCENARIO_KEYS[key](value)
    return out


def cmd_bench(args: argparse.Namespace) -> int:
    track_counts = [int(v) for v in args.tracks.split(",")]
    overrides = _scenario_overrides(args.scenario) if args.scenario else {}
    print(f"{'tracks':>8} {'ms/frame':>10} {'fps':>8}")
    csv_rows = ["n_tracks,frame,total_ms"]
    for n in track_counts:
        params = {
            "n_frames": args.frames,
            "overlap_fraction": args.overlap,
            "drop_prob": 0.05,
            "jitter_sigma": 1.0,
            "seed": args.seed,
        }
        params.update(overrides)
        cfg = ScenarioConfig(n_tracks=n, **params)
        frames, _ = generate(cfg)
        engine = AbductionEngine(_engine_config(args))
        for frame, dets in frames:
            engine.step(frame, dets)
        times = [s.total_ms for s in engine.latencies]
        mean = statistics.fmean(times)
        fps = 1000.0 / mean if mean > 0 else float("inf")
        print(f"{n:>8} {mean:>10.2f} {fps:>8.2f}")
        csv_rows += [f"{n},{s.frame},{s.total_ms:.4f}" for s in engine.latencies]
    if args.latency_csv:
        Path(args.latency_csv).write_text("\n".join(csv_rows) + "\n")
    return 0


def cmd_anticipate(args: argparse.Namespace) -> int:
    engine, exp, blocks = _run_engine(args, collect_anticipations=True)
    last: list[str] | None = None
    for block in blocks:
        # a steady prediction repeats frame after frame; print changes only
        if block != last:
            for line in block:
                print(line)
        last = block
    print(write_events(exp), end="")
    return 0


def cmd_emit_facts(args: argparse.Namespace) -> int:
    stream = _read_stream(args)
    config = _engine_config(args)
    engine = AbductionEngine(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for frame, dets in stream.frames:
        engine.step(frame, dets)
        (out_dir / f"frame_{frame:06d}.lp").write_text(emit_facts(engine.last_spec))
    print(f"wrote {len(stream.frames)} fact files to {out_dir}")
    return 0


def _add_threshold_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file; flags win")
    p.add_argument("--iou-thresh", dest="iou_thresh", type=float)
    p.add_argument("--conf-assign", dest="conf_assign", type=int)
    p.add_argument("--conf-resume", dest="conf_resume", type=int)
    p.add_argument("--conf-new", dest="conf_new", type=int)
    p.add_argument("--size-thresh", dest="size_thresh", type=float)
    p.add_argument("--max-halted-age", dest="max_halted_age", type=int)
    p.add_argument("--anticipation-threshold", dest="anticipation_threshold", type=int)
    p.add_argument("--horizon", dest="horizon", type=int)
    p.add_argument("--frame-geom", dest="frame_geom", help="WxH in pixels")


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="detection file")
    p.add_argument("--format", choices=["mot", "kitti"], default="mot")
    p.add_argument("--classes", help="comma-separated class filter (kitti)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abdtrack",
        description="Online multi-object tracking with joint event abduction",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run the tracker over a detection file")
    _add_input_flags(p)
    _add_threshold_flags(p)
    p.add_argument("--out-tracks", help="MOT result output path")
    p.add_argument("--out-events", help="event log output path")
    p.add_argument("--out-report", help="structured JSON report path")
    p.add_argument("--emit-facts", help="directory for per-frame fact dumps")
    p.add_argument("--latency-csv", help="per-frame latency CSV path")
    p.add_argument("--gt", help="optional ground-truth file; prints metrics after the run")
    p.add_argument("--match-iou", type=float, default=0.5)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="CLEAR-MOT evaluation of a result file")
    p.add_argument("--gt", required=True, help="ground-truth file (MOT format)")
    p.add_argument("--hyp", required=True, help="result file (MOT format)")
    p.add_argument("--match-iou", type=float, default=0.5)
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="synthetic scaling benchmark")
    p.add_argument("--tracks", default="5,10,20,50,100")
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--overlap", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scenario", help="scenario config file (key = value) overriding bench defaults")
    p.add_argument("--latency-csv", help="per-frame latency CSV path")
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("anticipate", help="track and print anticipations/warnings")
    _add_input_flags(p)
    _add_threshold_flags(p)
    p.set_defaults(func=cmd_anticipate)

    p = sub.add_parser("emit-facts", help="dump per-frame problem facts")
    _add_input_flags(p)
    _add_threshold_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_emit_facts)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
