"""Pick the human track by agreement with ground-truth keypoints, then zero out the rest."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import Frame, Track, as_points
from .tracking import filtered_positions


@dataclass(frozen=True)
class TrackScore:
    track_id: int
    rmse: float
    median_distance: float


@dataclass
class Selection:
    selected_track_ids: list[int]
    retained_indices: np.ndarray
    retained_points: np.ndarray
    scores: list[TrackScore] = field(default_factory=list)
    fallback: bool = False


def rmse(predicted, actual) -> float:
    """Root mean squared Euclidean distance between paired positions."""
    p = np.asarray(predicted, dtype=np.float64)
    a = np.asarray(actual, dtype=np.float64)
    if p.shape != a.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {a.shape}")
    if p.ndim != 2 or len(p) == 0:
        raise ValueError("rmse needs a non-empty list of vectors")
    d = p - a
    return float(math.sqrt((d * d).sum(axis=1).mean()))


def keypoint_median(keypoints) -> np.ndarray:
    kp = as_points(keypoints, "keypoints")
    if len(kp) == 0:
        raise ValueError("keypoint median of an empty set is undefined")
    return np.median(kp, axis=0)


def score_tracks(tracks: Sequence[Track], ground_truth) -> list[TrackScore]:
    """Score filtered tracks against per-segment keypoint medians.

    ``ground_truth`` maps segment index to a median position (a sequence
    indexed by segment works too; ``None`` entries mean no ground truth).
    RMSE is planar, on filtered positions; the median distance is 3-D, on
    observed centroids.
    """
    if not isinstance(ground_truth, Mapping):
        ground_truth = dict(enumerate(ground_truth))
    scores = []
    for t in tracks:
        filt = filtered_positions(t)
        pred, act, dists = [], [], []
        for node in t.nodes:
            gt = ground_truth.get(node.segment_index)
            if gt is None:
                continue
            gt = np.asarray(gt, dtype=np.float64)
            pred.append(filt[node.segment_index])
            act.append(gt[:2])
            dists.append(float(np.linalg.norm(node.centroid - gt)))
        if not pred:
            warnings.warn(f"track {t.track_id} has no segment with ground truth; not scored")
            continue
        scores.append(TrackScore(t.track_id, rmse(pred, act), float(np.median(dists))))
    return scores


def _retained(tracks: Sequence[Track], ids) -> tuple[np.ndarray, np.ndarray]:
    chosen = [t for t in tracks if t.track_id in ids]
    idx = [n.cluster.indices for t in chosen for n in t.nodes]
    pts = [n.cluster.points for t in chosen for n in t.nodes]
    if not idx:
        return np.zeros(0, dtype=np.int64), np.zeros((0, 3))
    return np.concatenate(idx), np.concatenate(pts)


def select_human(scores: Sequence[TrackScore], tracks: Sequence[Track]) -> Selection:
    """Keep the best-RMSE track, plus the closest-to-keypoints track if it differs."""
    if not scores:
        raise ValueError("need at least one track score")
    best_rmse = min(scores, key=lambda s: (s.rmse, s.track_id))
    best_dist = min(scores, key=lambda s: (s.median_distance, s.track_id))
    ids = sorted({best_rmse.track_id, best_dist.track_id})
    idx, pts = _retained(tracks, ids)
    return Selection(ids, idx, pts, list(scores))


def fallback_selection(tracks: Sequence[Track]) -> Optional[Selection]:
    """Used when no keypoints are available: most nodes, then most points."""
    if not tracks:
        return None
    best = min(tracks, key=lambda t: (-len(t), -t.point_count, t.track_id))
    idx, pts = _retained(tracks, [best.track_id])
    return Selection([best.track_id], idx, pts, [], fallback=True)


def zero_out(frame: Frame, keep_indices) -> Frame:
    """Replace every point whose index is not in ``keep_indices`` by the origin.

    Accepts a :class:`Selection` or an index array.
    """
    if isinstance(keep_indices, Selection):
        keep_indices = keep_indices.retained_indices
    mask = np.zeros(frame.frame_size, dtype=bool)
    mask[np.asarray(keep_indices, dtype=np.int64)] = True
    pts = np.where(mask[:, None], frame.points, 0.0)
    return Frame(frame.frame_id, pts, frame.keypoints, frame.action_label)


def write_scores_csv(scores: Sequence[TrackScore], selected, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["track_id", "rmse", "median_distance", "selected"])
    for s in scores:
        w.writerow([s.track_id, repr(s.rmse), repr(s.median_distance), int(s.track_id in selected)])
