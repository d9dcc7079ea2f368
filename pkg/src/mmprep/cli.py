"""Command-line entry point: ``mmprep {process,synth,bench,tune,inspect}``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .association import CostMatrix
from .clustering import DbscanConfig
from .core import TABLE_METHOD_SETS, MethodSet
from .ingest import FrameFormatError, SceneConfig, load_frames, synthesize_scene, write_frames, write_ground_truth
from .pipeline import PipelineConfig, benchmark, process_frame, run_pipeline, write_bench_csv
from .segmentation import SegmentationConfig
from .selection import write_scores_csv
from .tracking import KalmanParams
from .tuning import DEFAULT_BOUNDS, BoConfig, tune_kalman

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def read_config_file(path) -> dict[str, str]:
    """Flat ``key=value`` lines; ``#`` starts a comment. Keys use flag names."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path} line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().lstrip("-").replace("_", "-")] = value.strip()
    return out


PIPELINE_KEYS = {
    # flag: (attribute on argparse namespace, type, default)
    "methods": ("methods", str, "ds,km,hg"),
    "segments": ("segments", int, 5),
    "threshold": ("threshold", float, 0.001),
    "eps": ("eps", float, 0.4),
    "min-samples": ("min_samples", int, 6),
    "alpha": ("alpha", float, 0.25),
    "q": ("q", float, 29.41),
    "r": ("r", float, 0.081),
    "p0": ("p0", float, 14.64),
    "gate": ("gate", float, 2.0),
    "grid-cell": ("grid_cell", float, 0.5),
    "threads": ("threads", int, os.cpu_count() or 1),
}


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; flags override it")
    for flag, (dest, typ, default) in PIPELINE_KEYS.items():
        p.add_argument(f"--{flag}", dest=dest, type=typ, default=None, help=f"default {default}")


def _resolve(args) -> dict:
    file_vals = read_config_file(args.config) if getattr(args, "config", None) else {}
    unknown = set(file_vals) - set(PIPELINE_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    vals = {}
    for flag, (dest, typ, default) in PIPELINE_KEYS.items():
        v = getattr(args, dest, None)
        if v is None and flag in file_vals:
            try:
                v = typ(file_vals[flag])
            except ValueError as exc:
                raise UsageError(f"config key {flag!r}: bad value {file_vals[flag]!r}") from exc
        vals[dest] = default if v is None else v
    return vals


def _pipeline_config(args, emit: bool = False) -> tuple[PipelineConfig, int]:
    v = _resolve(args)
    try:
        methods = MethodSet.parse(v["methods"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    try:
        cfg = PipelineConfig(
            methods,
            SegmentationConfig(v["segments"], v["threshold"]),
            DbscanConfig(v["eps"], v["min_samples"], v["alpha"]),
            KalmanParams(v["q"], v["r"], v["p0"], v["gate"]),
            v["grid_cell"],
            emit,
        ).validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return cfg, max(1, v["threads"])


def _load(path):
    try:
        return load_frames(path)
    except (OSError, FrameFormatError) as exc:
        raise DataError(str(exc)) from exc


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.name + suffix)


def cmd_process(args) -> int:
    cfg, threads = _pipeline_config(args)
    frames = _load(args.input)
    try:
        out, report = run_pipeline(frames, cfg, workers=threads)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    output = Path(args.output)
    write_frames(out, output)
    _sibling(output, ".report.json").write_text(report.to_json(args.with_timings), encoding="utf-8")
    return EXIT_OK


def _parse_range(text: str) -> tuple[int, int]:
    parts = text.replace(":", "-").split("-")
    try:
        nums = [int(p) for p in parts if p]
    except ValueError as exc:
        raise UsageError(f"bad --human value {text!r}") from exc
    if len(nums) == 1:
        return nums[0], nums[0]
    if len(nums) == 2:
        return nums[0], nums[1]
    raise UsageError(f"bad --human value {text!r}")


def cmd_synth(args) -> int:
    cfg = SceneConfig(
        num_frames=args.frames,
        frame_size=args.frame_size,
        human_points=_parse_range(args.human),
        clutter_points=args.clutter,
        reflectors=args.reflectors,
        reflector_points=args.reflector_points,
        trajectory=args.trajectory,
        speed=args.speed,
        noise_sigma=args.noise,
        vertical_sigma=args.vertical_noise,
        num_keypoints=args.keypoints,
        seed=args.seed,
    )
    try:
        frames, truth = synthesize_scene(cfg)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    output = Path(args.output)
    write_frames(frames, output)
    write_ground_truth(truth, output.with_name(output.stem + ".truth.jsonl"))
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.reps < 3:
        raise UsageError("--reps must be at least 3")
    cfg, _ = _pipeline_config(args)
    frames = _load(args.input)
    if args.max_frames:
        frames.frames = frames.frames[: args.max_frames]
    rows = benchmark(frames, TABLE_METHOD_SETS, args.reps, cfg)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_bench_csv(rows, fh)
    else:
        write_bench_csv(rows, sys.stdout)
    return EXIT_OK


def _bounds(text, default):
    if text is None:
        return default
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bounds must look like LOW,HIGH, got {text!r}") from exc
    return lo, hi


def cmd_tune(args) -> int:
    bounds = (
        _bounds(args.q_bounds, DEFAULT_BOUNDS[0]),
        _bounds(args.r_bounds, DEFAULT_BOUNDS[1]),
        _bounds(args.p0_bounds, DEFAULT_BOUNDS[2]),
    )
    try:
        bo = BoConfig(bounds=bounds, iterations=args.iterations, initial_samples=args.initial,
                      seed=args.seed, log_scale=True).validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    cfg, _ = _pipeline_config(args)
    frames = _load(args.input)
    try:
        trace, best = tune_kalman(frames, bo, cfg, args.sample_size)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    out = Path(args.out)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        trace.write_csv(fh)
    best_doc = {"q": best.q, "r": best.r, "p0": best.p0, "objective": trace.best[1],
                "iteration": trace.best_index + 1}
    out.with_name(out.stem + ".best.json").write_text(json.dumps(best_doc, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _write_cost_csv(cm: CostMatrix, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row"] + [f"c{c.label}" for c in cm.cols])
        for i, c in enumerate(cm.rows):
            w.writerow([f"c{c.label}"] + [repr(float(v)) for v in cm.costs[i]])


def cmd_inspect(args) -> int:
    cfg, _ = _pipeline_config(args, emit=True)
    frames = _load(args.input)
    try:
        frame = frames.by_id(args.frame_id)
    except KeyError:
        raise DataError(f"frame {args.frame_id} not found") from None
    _, res = process_frame(frame, cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    what = args.what

    def table(name, header, rows):
        with open(out_dir / name, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    f = lambda v: repr(float(v))  # noqa: E731
    if what == "segments":
        table("segments.csv", ["segment_index", "point_index", "x", "y", "z"],
              [[s.segment_index, int(i), f(p[0]), f(p[1]), f(p[2])]
               for s in res.segments for i, p in zip(s.indices, s.points)])
    elif what == "clusters":
        rows = []
        for s, clusters, lab in zip(res.segments, res.clusters, res.labelings or [None] * len(res.segments)):
            if lab is not None:
                labels = lab.labels
            else:
                labels = np.full(len(s), -1)
                pos = {int(i): k for k, i in enumerate(s.indices)}
                for c in clusters:
                    for i in c.indices:
                        labels[pos[int(i)]] = c.label
            rows += [[s.segment_index, int(i), f(p[0]), f(p[1]), f(p[2]), int(l)]
                     for i, p, l in zip(s.indices, s.points, labels)]
        table("clusters.csv", ["segment_index", "point_index", "x", "y", "z", "label"], rows)
    elif what == "costs":
        for t, cm in enumerate(res.cost_matrices):
            _write_cost_csv(cm, out_dir / f"costs_{t}_{t + 1}.csv")
    elif what == "tracks":
        rows = []
        for t in res.tracks:
            recs = {r.segment_index: r for r in res.step_records.get(t.track_id, [])}
            for seg, pred, filt, _ in t.kalman_history or []:
                node = t.node_at(seg)
                r = recs.get(seg)
                obs = node.centroid if node is not None else None
                rows.append([
                    t.track_id, seg,
                    "" if node is None else node.cluster.label,
                    *(("",) * 3 if obs is None else (f(obs[0]), f(obs[1]), f(obs[2]))),
                    f(pred[0]), f(pred[1]), f(filt[0]), f(filt[1]),
                    "" if r is None else int(r.observed_xy is not None),
                    f(0.0 if r is None else r.state_change),
                    f(0.0 if r is None else r.prediction_error),
                ])
        table("tracks.csv", ["track_id", "segment_index", "cluster_label", "centroid_x", "centroid_y",
                             "centroid_z", "predicted_x", "predicted_y", "filtered_x", "filtered_y",
                             "gated_in", "state_change", "prediction_error"], rows)
    elif what == "scores":
        sel = res.selection
        if sel is None or not sel.scores:
            raise DataError("no track scores for this frame (needs keypoints and the full pipeline)")
        with open(out_dir / "scores.csv", "w", encoding="utf-8", newline="") as fh:
            write_scores_csv(sel.scores, set(sel.selected_track_ids), fh)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mmprep", description="mmWave point-cloud preprocessing")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("process", help="run a method combination over a frame file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--with-timings", action="store_true", help="include stage timings in the report")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("synth", help="write a synthetic scene and its ground truth")
    p.add_argument("output")
    p.add_argument("--frames", type=int, default=10)
    p.add_argument("--frame-size", type=int, default=1100)
    p.add_argument("--human", default="60-300", help="N or LOW-HIGH human points per frame")
    p.add_argument("--clutter", type=int, default=40)
    p.add_argument("--reflectors", type=int, default=2)
    p.add_argument("--reflector-points", type=int, default=40)
    p.add_argument("--trajectory", choices=("linear", "sinusoidal", "stationary"), default="linear")
    p.add_argument("--speed", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.12)
    p.add_argument("--vertical-noise", type=float, default=0.3)
    p.add_argument("--keypoints", type=int, default=18)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time all seven method combinations")
    p.add_argument("input")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--out")
    p.add_argument("--max-frames", type=int, default=0)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tune", help="Bayesian optimization of the Kalman noise scales")
    p.add_argument("input")
    p.add_argument("--out", required=True, help="trace CSV; best params go to <stem>.best.json")
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--initial", type=int, default=5)
    p.add_argument("--sample-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--q-bounds")
    p.add_argument("--r-bounds")
    p.add_argument("--p0-bounds")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("inspect", help="dump one frame's intermediates as CSV")
    p.add_argument("input")
    p.add_argument("--frame-id", type=int, required=True)
    p.add_argument("--what", choices=("segments", "clusters", "costs", "tracks", "scores"), required=True)
    p.add_argument("--out-dir", default=".")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mmprep: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"mmprep: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
