"""Compose the stages into the seven method combinations.

Standalone semantics for each combination:

========  ==============================================================
DS        DBSCAN per segment, keep the largest cluster of each segment
KM        one pseudo-track of per-segment centroids, Kalman-filtered;
          keep points within the gate radius of the filtered position
HG        grid-cell pseudo-clusters, Hungarian tracks, keep the longest
HG+DS     DBSCAN clusters, Hungarian tracks, keep the longest
DS+KM     DBSCAN clusters chained by nearest centroid, Kalman-filtered;
          keep clusters that passed the gate
KM+HG     grid pseudo-clusters, Hungarian tracks, Kalman on each; keep
          the track with the lowest mean prediction error
DS+KM+HG  DBSCAN, Hungarian tracks, Kalman, keypoint-based selection
========  ==============================================================

Every output frame has the input frame size; dropped points become (0, 0, 0).
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .association import CostMatrix, build_tracks, cost_matrix, longest_track
from .clustering import ClusterLabeling, DbscanConfig, cluster_segment, largest_cluster
from .core import TABLE_METHOD_SETS, Cluster, Frame, MethodSet, Segment, Track, TrackNode
from .ingest import FrameSet
from .segmentation import SegmentationConfig, segment_frame
from .selection import (
    Selection,
    fallback_selection,
    keypoint_median,
    score_tracks,
    select_human,
    zero_out,
)
from .tracking import KalmanParams, StepRecord, mean_prediction_error, track_with_kf

STAGES = ("segmentation", "clustering", "association", "tracking", "selection")


@dataclass(frozen=True)
class PipelineConfig:
    methods: MethodSet = MethodSet(ds=True, hg=True, km=True)
    segmentation: SegmentationConfig = SegmentationConfig()
    dbscan: DbscanConfig = DbscanConfig()
    kalman: KalmanParams = KalmanParams()
    grid_cell: float = 0.5
    emit_intermediates: bool = False

    def validate(self) -> "PipelineConfig":
        self.methods.validate()
        self.segmentation.validate()
        self.dbscan.validate()
        self.kalman.validate()
        if not self.grid_cell > 0:
            raise ValueError("grid_cell must be positive")
        return self


@dataclass
class FrameResult:
    frame_id: int
    retained_indices: np.ndarray
    segments: list[Segment] = field(default_factory=list)
    labelings: list[Optional[ClusterLabeling]] = field(default_factory=list)
    clusters: list[list[Cluster]] = field(default_factory=list)
    cost_matrices: list[CostMatrix] = field(default_factory=list)
    tracks: list[Track] = field(default_factory=list)
    step_records: dict[int, list[StepRecord]] = field(default_factory=dict)
    selection: Optional[Selection] = None
    fallback: bool = False


@dataclass
class PipelineReport:
    methods: str
    per_stage_seconds: dict[str, float]
    frames_processed: int
    mean_retained_points: float
    retained_counts: list[int] = field(default_factory=list)
    fallback_frames: int = 0
    per_frame_outputs: Optional[list[FrameResult]] = None

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "methods": self.methods,
            "frames_processed": self.frames_processed,
            "mean_retained_points": self.mean_retained_points,
            "retained_counts": self.retained_counts,
            "fallback_frames": self.fallback_frames,
        }
        if include_timings:
            out["per_stage_seconds"] = self.per_stage_seconds
        return out

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True) + "\n"


class _StageTimer:
    def __init__(self):
        self.seconds: dict[str, float] = defaultdict(float)

    @contextmanager
    def __call__(self, stage: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[stage] += time.perf_counter() - t0


def grid_clusters(segment: Segment, cell: float, min_points: int) -> list[Cluster]:
    """Occupied grid cells with at least ``min_points`` points, in first-seen order."""
    if len(segment) == 0:
        return []
    keys = np.floor(segment.points / cell).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    out = []
    for cell_id in np.argsort(first, kind="stable"):
        members = np.flatnonzero(inverse == cell_id)
        if len(members) >= min_points:
            out.append(Cluster(len(out), segment.segment_index,
                               segment.points[members], segment.indices[members]))
    return out


def _concat_indices(clusters: Sequence[Cluster]) -> np.ndarray:
    if not clusters:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate([c.indices for c in clusters])


def _track_indices(track: Optional[Track]) -> np.ndarray:
    if track is None:
        return np.zeros(0, dtype=np.int64)
    return _concat_indices([n.cluster for n in track.nodes])


def _dbscan_all(segments, cfg, res) -> list[list[Cluster]]:
    labelings = [cluster_segment(s, cfg.dbscan) for s in segments]
    res.labelings = labelings
    return [lab.clusters for lab in labelings]


def _grid_all(segments, cfg) -> list[list[Cluster]]:
    return [grid_clusters(s, cfg.grid_cell, cfg.dbscan.min_samples) for s in segments]


def _hungarian_tracks(per_seg, res) -> list[Track]:
    res.cost_matrices = [cost_matrix(a, b) for a, b in zip(per_seg, per_seg[1:])]
    return build_tracks(per_seg)


def _nearest_chain(per_seg: list[list[Cluster]]) -> Optional[Track]:
    """Seed on the largest cluster of the first non-empty segment, then follow
    the nearest centroid segment by segment."""
    track = None
    for clusters in per_seg:
        if not clusters:
            continue
        if track is None:
            seed = max(clusters, key=lambda c: (c.size, -c.label))
            track = Track(0)
            track.append(TrackNode(seed.segment_index, seed, seed.centroid))
            continue
        last = track.nodes[-1].centroid
        nxt = min(clusters, key=lambda c: (float(np.linalg.norm(c.centroid - last)), c.label))
        track.append(TrackNode(nxt.segment_index, nxt, nxt.centroid))
    return track


def process_frame(frame: Frame, config: PipelineConfig, timer: Optional[_StageTimer] = None):
    """Run one frame through the configured stages; returns ``(frame_out, FrameResult)``."""
    timer = timer or _StageTimer()
    m = config.methods
    res = FrameResult(frame.frame_id, np.zeros(0, dtype=np.int64))

    with timer("segmentation"):
        segments = segment_frame(frame, config.segmentation)
    res.segments = segments

    keep = np.zeros(0, dtype=np.int64)
    if m.ds and not m.hg and not m.km:
        with timer("clustering"):
            per_seg = _dbscan_all(segments, config, res)
        with timer("selection"):
            largest = [largest_cluster(lab) for lab in res.labelings]
            keep = _concat_indices([c for c in largest if c is not None])

    elif m.km and not m.ds and not m.hg:
        per_seg = [[Cluster(0, s.segment_index, s.points, s.indices)] if len(s) else [] for s in segments]
        with timer("association"):
            track = Track(0)
            for cl in (c[0] for c in per_seg if c):
                track.append(TrackNode(cl.segment_index, cl, cl.centroid))
        if track.nodes:
            with timer("tracking"):
                _, recs = track_with_kf(track, config.kalman)
            res.tracks, res.step_records = [track], {0: recs}
            with timer("selection"):
                keep = _gate_points(track, segments, config.kalman.gate)

    elif m.hg and not m.ds and not m.km:
        with timer("clustering"):
            per_seg = _grid_all(segments, config)
        with timer("association"):
            tracks = _hungarian_tracks(per_seg, res)
        res.tracks = tracks
        with timer("selection"):
            keep = _track_indices(longest_track(tracks))

    elif m.ds and m.hg and not m.km:
        with timer("clustering"):
            per_seg = _dbscan_all(segments, config, res)
        with timer("association"):
            tracks = _hungarian_tracks(per_seg, res)
        res.tracks = tracks
        with timer("selection"):
            keep = _track_indices(longest_track(tracks))

    elif m.ds and m.km and not m.hg:
        with timer("clustering"):
            per_seg = _dbscan_all(segments, config, res)
        with timer("association"):
            track = _nearest_chain(per_seg)
        if track is not None:
            with timer("tracking"):
                _, recs = track_with_kf(track, config.kalman)
            res.tracks, res.step_records = [track], {0: recs}
            with timer("selection"):
                gated = {r.segment_index for r in recs if r.observed_xy is not None}
                gated.add(track.nodes[0].segment_index)
                keep = _concat_indices([n.cluster for n in track.nodes if n.segment_index in gated])

    elif m.km and m.hg and not m.ds:
        with timer("clustering"):
            per_seg = _grid_all(segments, config)
        with timer("association"):
            tracks = _hungarian_tracks(per_seg, res)
        res.tracks = tracks
        with timer("tracking"):
            errors = {}
            for t in tracks:
                _, recs = track_with_kf(t, config.kalman)
                res.step_records[t.track_id] = recs
                errors[t.track_id] = mean_prediction_error(recs)
        with timer("selection"):
            if tracks:
                best = min(tracks, key=lambda t: (errors[t.track_id], -len(t), -t.point_count, t.track_id))
                keep = _track_indices(best)

    else:  # full pipeline
        with timer("clustering"):
            per_seg = _dbscan_all(segments, config, res)
        with timer("association"):
            tracks = _hungarian_tracks(per_seg, res)
        res.tracks = tracks
        with timer("tracking"):
            for t in tracks:
                _, res.step_records[t.track_id] = track_with_kf(t, config.kalman)
        with timer("selection"):
            sel = None
            if tracks and frame.keypoints is not None:
                med = keypoint_median(frame.keypoints)
                scores = score_tracks(tracks, {s.segment_index: med for s in segments})
                if scores:
                    sel = select_human(scores, tracks)
            if sel is None and tracks:
                sel = fallback_selection(tracks)
                res.fallback = True
            res.selection = sel
            if sel is not None:
                keep = sel.retained_indices

    res.clusters = per_seg
    with timer("selection"):
        out = zero_out(frame, keep)
    res.retained_indices = np.sort(keep)
    return out, res


def _gate_points(track: Track, segments: Sequence[Segment], gate: float) -> np.ndarray:
    filt = {seg: f for seg, _, f, _ in track.kalman_history}
    keep = []
    for s in segments:
        f = filt.get(s.segment_index)
        if f is None or len(s) == 0:
            continue
        d = np.hypot(s.points[:, 0] - f[0], s.points[:, 1] - f[1])
        keep.append(s.indices[d <= gate])
    return np.concatenate(keep) if keep else np.zeros(0, dtype=np.int64)


def run_pipeline(frames: FrameSet, config: PipelineConfig = PipelineConfig(), workers: int = 1):
    """Process every frame; returns ``(processed FrameSet, PipelineReport)``.

    With ``workers > 1`` frames run on a thread pool; output order and content
    do not depend on the worker count.
    """
    config.validate()
    if len(frames) == 0:
        raise ValueError("no frames to process")

    def one(frame):
        timer = _StageTimer()
        out, res = process_frame(frame, config, timer)
        return out, res, timer.seconds

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, frames.frames))
    else:
        results = [one(f) for f in frames.frames]

    totals: dict[str, float] = {}
    for _, _, secs in results:
        for k, v in secs.items():
            totals[k] = totals.get(k, 0.0) + v
    counts = [len(r.retained_indices) for _, r, _ in results]
    report = PipelineReport(
        methods=config.methods.name,
        per_stage_seconds={k: totals[k] for k in STAGES if k in totals},
        frames_processed=len(results),
        mean_retained_points=float(np.mean(counts)),
        retained_counts=counts,
        fallback_frames=sum(r.fallback for _, r, _ in results),
        per_frame_outputs=[r for _, r, _ in results] if config.emit_intermediates else None,
    )
    out = FrameSet([o for o, _, _ in results], frame_size=frames.frame_size,
                   num_keypoints=frames.num_keypoints, source=frames.source)
    return out, report


@dataclass
class BenchRow:
    methods: str
    per_frame_seconds: float
    stage: str
    stage_seconds: float


def benchmark(frames: FrameSet, method_sets: Sequence[MethodSet] = TABLE_METHOD_SETS,
              repetitions: int = 3, base: PipelineConfig = PipelineConfig()) -> list[BenchRow]:
    """Median per-frame wall time for each method set, with a per-stage breakdown.

    Repetitions are interleaved (each round runs every method set once), so
    slow drift in machine load is shared evenly instead of landing on
    whichever method happens to run during it.
    """
    if repetitions < 3:
        raise ValueError("repetitions must be at least 3")
    if len(frames) == 0:
        raise ValueError("no frames to benchmark")
    n = len(frames)
    configs = [PipelineConfig(ms, base.segmentation, base.dbscan, base.kalman, base.grid_cell)
               for ms in method_sets]
    totals = [[] for _ in configs]
    stages = [defaultdict(list) for _ in configs]
    for _ in range(repetitions):
        for k, cfg in enumerate(configs):
            t0 = time.perf_counter()
            _, rep = run_pipeline(frames, cfg)
            totals[k].append((time.perf_counter() - t0) / n)
            for name, v in rep.per_stage_seconds.items():
                stages[k][name].append(v / n)
    rows = []
    for k, ms in enumerate(method_sets):
        per_frame = statistics.median(totals[k])
        for name in STAGES:
            if name in stages[k]:
                rows.append(BenchRow(ms.name, per_frame, name, statistics.median(stages[k][name])))
    return rows


def write_bench_csv(rows: Sequence[BenchRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["methods", "per_frame_seconds", "stage", "stage_seconds"])
    for r in rows:
        w.writerow([r.methods, f"{r.per_frame_seconds:.9g}", r.stage, f"{r.stage_seconds:.9g}"])
