"""Centroids, inter-segment cost matrices, Hungarian assignment and track chaining."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Cluster, Track, TrackNode, as_points


@dataclass
class CostMatrix:
    rows: list[Cluster]
    cols: list[Cluster]
    costs: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.costs.shape


@dataclass
class Assignment:
    pairs: list[tuple[int, int]]
    unmatched_rows: list[int] = field(default_factory=list)
    unmatched_cols: list[int] = field(default_factory=list)
    total_cost: float = 0.0


def centroid(points) -> np.ndarray:
    pts = as_points(points)
    if len(pts) == 0:
        raise ValueError("centroid of an empty point set is undefined")
    return pts.mean(axis=0)


def cost_matrix(a: Sequence[Cluster], b: Sequence[Cluster]) -> CostMatrix:
    """Plain 3-D Euclidean distances between cluster centroids."""
    ca = np.array([c.centroid for c in a], dtype=np.float64).reshape(-1, 3)
    cb = np.array([c.centroid for c in b], dtype=np.float64).reshape(-1, 3)
    diff = ca[:, None, :] - cb[None, :, :]
    return CostMatrix(list(a), list(b), np.sqrt((diff * diff).sum(axis=2)))


def _hungarian_square(c: np.ndarray):
    """Shortest-augmenting-path Hungarian method on a square matrix.

    Returns ``(row_to_col, u, v)`` where ``u``/``v`` are optimal dual
    potentials: ``c[i, j] - u[i] - v[j] >= 0`` everywhere, zero on the matching.
    """
    n = c.shape[0]
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: row (1-based) matched to column j
    way = [0] * (n + 1)
    rows = c.tolist()
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            ci = rows[i0 - 1]
            ui = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = ci[j - 1] - ui - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = [0] * n
    for j in range(1, n + 1):
        row_to_col[p[j] - 1] = j - 1
    return row_to_col, np.array(u[1:]), np.array(v[1:])


def _lexicographic_optimum(tight: np.ndarray, match: list[int], n_rows: int, n_cols: int) -> list[int]:
    """Rewrite ``match`` into the lexicographically smallest optimal matching.

    Every optimal matching lives on the tight edges of an optimal dual, so this
    is a search for the lex-smallest perfect matching of the tight graph,
    done greedily row by row with alternating-path repairs.
    """
    n = len(match)
    match = list(match)
    owner = [0] * n
    for r, c in enumerate(match):
        owner[c] = r
    allowed = tight.copy()

    def reroute(r: int, c: int) -> bool:
        # force row r onto column c, repairing the rest of the matching
        if match[r] == c:
            return True
        r2, c2 = owner[c], match[r]
        seen = [False] * n
        parent_col: dict[int, int] = {}

        def dfs(x: int) -> bool:
            for y in np.flatnonzero(allowed[x]):
                y = int(y)
                if y == c or seen[y]:
                    continue
                seen[y] = True
                if y == c2 or dfs(owner[y]):
                    parent_col[x] = y
                    return True
            return False

        if not dfs(r2):
            return False
        # flip the alternating path starting at r2
        x = r2
        while True:
            y = parent_col[x]
            prev = owner[y] if y != c2 else None
            match[x] = y
            owner[y] = x
            if prev is None:
                break
            x = prev
        match[r] = c
        owner[c] = r
        return True

    for r in range(n_rows):
        placed = False
        for c in range(n_cols):
            if allowed[r, c] and reroute(r, c):
                placed = True
                break
        keep = np.zeros(n, dtype=bool)
        if placed:
            keep[match[r]] = True
        else:
            keep[n_cols:] = True  # row stays unmatched (padded column)
        allowed[r] &= keep
    return match


def hungarian_assign(costs) -> Assignment:
    """Minimum-cost matching of size ``min(rows, cols)``.

    Rectangular inputs are padded to square with a constant sentinel and the
    padded pairs reported as unmatched. Among equal-cost optima the
    lexicographically smallest sorted pair list is returned.
    """
    c = np.asarray(costs.costs if isinstance(costs, CostMatrix) else costs, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError("cost matrix must be two-dimensional")
    n_rows, n_cols = c.shape
    if c.size and (not np.all(np.isfinite(c)) or np.any(c < 0)):
        raise ValueError("costs must be finite and non-negative")
    if n_rows == 0 or n_cols == 0:
        return Assignment([], list(range(n_rows)), list(range(n_cols)), 0.0)

    n = max(n_rows, n_cols)
    top = float(c.max())
    sentinel = (top + 1.0) * n
    square = np.full((n, n), sentinel)
    square[:n_rows, :n_cols] = c
    match, u, v = _hungarian_square(square)

    tol = 1e-9 * max(1.0, top)
    tight = square - u[:, None] - v[None, :] <= tol
    match = _lexicographic_optimum(tight, match, n_rows, n_cols)

    pairs = [(r, match[r]) for r in range(n_rows) if match[r] < n_cols]
    matched_cols = {j for _, j in pairs}
    return Assignment(
        pairs,
        [r for r in range(n_rows) if match[r] >= n_cols],
        [j for j in range(n_cols) if j not in matched_cols],
        float(sum(c[i, j] for i, j in pairs)),
    )


def build_tracks(per_segment_clusters: Sequence[Sequence[Cluster]],
                 max_link_cost: Optional[float] = None) -> list[Track]:
    """Chain Hungarian matches between consecutive segments into tracks.

    A track that misses a segment is not revived by later association. Any
    cluster left unmatched starts a new track; ids follow creation order.
    """
    tracks: list[Track] = []
    prev: list[Cluster] = []
    prev_owner: list[Track] = []

    def spawn(cl: Cluster) -> Track:
        t = Track(len(tracks))
        t.append(TrackNode(cl.segment_index, cl, cl.centroid))
        tracks.append(t)
        return t

    for clusters in per_segment_clusters:
        clusters = list(clusters)
        owner: list[Optional[Track]] = [None] * len(clusters)
        if prev and clusters:
            cm = cost_matrix(prev, clusters)
            for i, j in hungarian_assign(cm).pairs:
                if max_link_cost is not None and cm.costs[i, j] > max_link_cost:
                    continue
                cl = clusters[j]
                prev_owner[i].append(TrackNode(cl.segment_index, cl, cl.centroid))
                owner[j] = prev_owner[i]
        for j, cl in enumerate(clusters):
            if owner[j] is None:
                owner[j] = spawn(cl)
        prev, prev_owner = clusters, owner
    return tracks


def longest_track(tracks: Sequence[Track]) -> Optional[Track]:
    """Most nodes, then most points, then lowest id."""
    if not tracks:
        return None
    return min(tracks, key=lambda t: (-len(t), -t.point_count, t.track_id))
