"""DBSCAN with a down-weighted vertical axis."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Cluster, Segment, as_points

NOISE = -1


@dataclass(frozen=True)
class DbscanConfig:
    eps: float = 0.4
    min_samples: int = 6
    alpha: float = 0.25

    def validate(self) -> "DbscanConfig":
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.min_samples < 1:
            raise ValueError("min_samples must be at least 1")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        return self


@dataclass
class ClusterLabeling:
    labels: np.ndarray
    clusters: list[Cluster] = field(default_factory=list)

    @property
    def noise_count(self) -> int:
        return int(np.count_nonzero(self.labels == NOISE))


def weighted_distance(p, q, alpha: float = 0.25) -> float:
    """Euclidean distance with the squared z difference scaled by ``alpha``."""
    dx, dy, dz = (float(a) - float(b) for a, b in zip(p, q))
    return float(np.sqrt(dx * dx + dy * dy + alpha * dz * dz))


def pairwise_weighted(points: np.ndarray, alpha: float) -> np.ndarray:
    d = points[:, None, :] - points[None, :, :]
    sq = d[..., 0] ** 2 + d[..., 1] ** 2 + alpha * d[..., 2] ** 2
    return np.sqrt(sq)


def dbscan(points, config: DbscanConfig = DbscanConfig(), segment_index: int = 0,
           indices: Optional[np.ndarray] = None) -> ClusterLabeling:
    """Label ``points`` with cluster ids (``-1`` for noise).

    Neighborhoods are ``distance <= eps`` and include the point itself. Points
    are scanned in input order and clusters grow breadth-first, so a border
    point shared by two clusters goes to whichever reaches it first. Ids
    are then renumbered by the first input index carrying each cluster.
    """
    config.validate()
    pts = as_points(points)
    n = len(pts)
    if indices is None:
        indices = np.arange(n)
    labels = np.full(n, NOISE, dtype=np.int64)
    if n == 0:
        return ClusterLabeling(labels, [])

    adjacency = pairwise_weighted(pts, config.alpha) <= config.eps
    neighbors = [np.flatnonzero(row) for row in adjacency]
    is_core = adjacency.sum(axis=1) >= config.min_samples
    visited = np.zeros(n, dtype=bool)

    next_id = 0
    for i in range(n):
        if visited[i] or not is_core[i]:
            continue
        cid = next_id
        next_id += 1
        visited[i] = True
        labels[i] = cid
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in neighbors[p]:
                if labels[q] == NOISE:
                    labels[q] = cid
                    if is_core[q] and not visited[q]:
                        visited[q] = True
                        queue.append(q)

    # renumber by first appearance of any member (a border point may precede its core)
    if next_id:
        members = labels[labels != NOISE]
        _, first = np.unique(members, return_index=True)
        order = np.argsort(first)
        remap = np.empty(next_id, dtype=np.int64)
        remap[order] = np.arange(next_id)
        labels[labels != NOISE] = remap[members]

    clusters = [
        Cluster(cid, segment_index, pts[labels == cid], indices[labels == cid])
        for cid in range(next_id)
    ]
    return ClusterLabeling(labels, clusters)


def cluster_segment(segment: Segment, config: DbscanConfig = DbscanConfig()) -> ClusterLabeling:
    return dbscan(segment.points, config, segment.segment_index, segment.indices)


def largest_cluster(labeling: ClusterLabeling) -> Optional[Cluster]:
    best = None
    for c in labeling.clusters:
        if best is None or c.size > best.size:
            best = c
    return best
