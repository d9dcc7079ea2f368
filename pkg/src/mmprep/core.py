"""Shared domain types for the radar preprocessing pipeline.

Points are carried as float64 numpy arrays: a single point has shape ``(3,)``
and a point list has shape ``(n, 3)``. Coordinates are meters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

DEFAULT_FRAME_SIZE = 1100
DEFAULT_NUM_SEGMENTS = 5
NUM_ACTIONS = 49


def as_points(values, name: str = "points") -> np.ndarray:
    """Coerce ``values`` to a finite ``(n, 3)`` float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return np.zeros((0, 3))
    if arr.ndim == 1 and arr.shape[0] == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name}: expected shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: coordinates must be finite")
    return arr


def squared_norm(p: Sequence[float]) -> float:
    x, y, z = (float(c) for c in p)
    return x * x + y * y + z * z


@dataclass(frozen=True, eq=False)
class Frame:
    """One stacked radar sample.

    Point order is the temporal stacking order and is preserved by every stage.
    """

    frame_id: int
    points: np.ndarray
    keypoints: Optional[np.ndarray] = None
    action_label: Optional[int] = None

    def __post_init__(self):
        if self.frame_id < 0:
            raise ValueError("frame_id must be non-negative")
        object.__setattr__(self, "points", as_points(self.points))
        if self.keypoints is not None:
            kp = as_points(self.keypoints, "keypoints")
            if len(kp) == 0:
                raise ValueError("keypoints, when present, must be non-empty")
            object.__setattr__(self, "keypoints", kp)
        if self.action_label is not None and not 0 <= self.action_label < NUM_ACTIONS:
            raise ValueError(f"action_label out of range: {self.action_label}")

    @property
    def frame_size(self) -> int:
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        if self.keypoints is None or other.keypoints is None:
            same_kp = self.keypoints is None and other.keypoints is None
        else:
            same_kp = np.array_equal(self.keypoints, other.keypoints)
        return (
            self.frame_id == other.frame_id
            and self.action_label == other.action_label
            and np.array_equal(self.points, other.points)
            and same_kp
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Segment:
    """A contiguous window of a frame.

    ``indices`` holds each point's position in the parent frame so later
    stages can zero out by position rather than by coordinate value.
    """

    segment_index: int
    points: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if len(idx) != len(pts):
            raise ValueError("indices must align with points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class Cluster:
    label: int
    segment_index: int
    points: np.ndarray
    indices: np.ndarray
    centroid: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = as_points(self.points)
        if len(pts) == 0:
            raise ValueError("a cluster needs at least one point")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64).reshape(-1))
        if self.centroid is None:
            object.__setattr__(self, "centroid", pts.mean(axis=0))
        else:
            object.__setattr__(self, "centroid", np.asarray(self.centroid, dtype=np.float64))

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class TrackNode:
    segment_index: int
    cluster: Cluster
    centroid: np.ndarray


@dataclass
class Track:
    """Chain of clusters linked across consecutive segments.

    ``kalman_history`` is filled by the tracking stage with one
    ``(segment_index, predicted_xy, filtered_xy, innovation_norm)`` tuple per
    segment from the first node to the last.
    """

    track_id: int
    nodes: list[TrackNode] = field(default_factory=list)
    kalman_history: Optional[list] = None

    def append(self, node: TrackNode) -> None:
        if self.nodes and node.segment_index <= self.nodes[-1].segment_index:
            raise ValueError(
                f"track {self.track_id}: segment {node.segment_index} does not follow "
                f"{self.nodes[-1].segment_index}"
            )
        self.nodes.append(node)

    @property
    def segments(self) -> list[int]:
        return [n.segment_index for n in self.nodes]

    @property
    def point_count(self) -> int:
        return sum(n.cluster.size for n in self.nodes)

    def node_at(self, segment_index: int) -> Optional[TrackNode]:
        for n in self.nodes:
            if n.segment_index == segment_index:
                return n
        return None

    def __len__(self):
        return len(self.nodes)


@dataclass(frozen=True)
class MethodSet:
    ds: bool = False
    hg: bool = False
    km: bool = False

    def validate(self) -> "MethodSet":
        if not (self.ds or self.hg or self.km):
            raise ValueError("at least one of ds, hg, km must be enabled")
        return self

    @classmethod
    def parse(cls, text: str) -> "MethodSet":
        """Parse a comma list such as ``"ds,hg"``; ``+`` also separates."""
        flags = {"ds": False, "hg": False, "km": False}
        for token in text.replace("+", ",").split(","):
            token = token.strip().lower()
            if not token:
                continue
            if token not in flags:
                raise ValueError(f"unknown method {token!r}")
            flags[token] = True
        return cls(**flags).validate()

    @property
    def name(self) -> str:
        # fixed spellings, used in reports and benchmark rows
        parts = {
            (False, False, True): "KM",
            (True, False, False): "DS",
            (False, True, False): "HG",
            (False, True, True): "KM+HG",
            (True, True, False): "HG+DS",
            (True, False, True): "DS+KM",
            (True, True, True): "DS+KM+HG",
        }
        return parts.get((self.ds, self.hg, self.km), "none")


# The seven combinations, in the order reports and benchmarks list them.
TABLE_METHOD_SETS = (
    MethodSet(km=True),
    MethodSet(ds=True),
    MethodSet(hg=True),
    MethodSet(km=True, hg=True),
    MethodSet(hg=True, ds=True),
    MethodSet(ds=True, km=True),
    MethodSet(ds=True, km=True, hg=True),
)
