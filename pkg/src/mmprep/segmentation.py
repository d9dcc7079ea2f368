"""Frame segmentation and zero-padding removal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DEFAULT_NUM_SEGMENTS, Frame, Segment

NULL_THRESHOLD = 0.001


@dataclass(frozen=True)
class SegmentationConfig:
    num_segments: int = DEFAULT_NUM_SEGMENTS
    null_threshold: float = NULL_THRESHOLD

    def validate(self) -> "SegmentationConfig":
        if self.num_segments < 1:
            raise ValueError("num_segments must be at least 1")
        if self.null_threshold < 0:
            raise ValueError("null_threshold must be non-negative")
        return self


def segment_bounds(frame_size: int, num_segments: int) -> list[tuple[int, int]]:
    """Half-open index ranges; the last segment takes any remainder."""
    if num_segments < 1:
        raise ValueError("num_segments must be at least 1")
    if frame_size < num_segments:
        raise ValueError(f"cannot split {frame_size} points into {num_segments} segments")
    step = frame_size // num_segments
    bounds = [(i * step, (i + 1) * step) for i in range(num_segments)]
    bounds[-1] = (bounds[-1][0], frame_size)
    return bounds


def split_frame(frame: Frame, config: SegmentationConfig = SegmentationConfig()) -> list[Segment]:
    bounds = segment_bounds(frame.frame_size, config.num_segments)
    return [
        Segment(i, frame.points[a:b], np.arange(a, b))
        for i, (a, b) in enumerate(bounds)
    ]


def remove_null_points(segment: Segment, threshold: float = NULL_THRESHOLD) -> Segment:
    """Keep points whose squared norm strictly exceeds ``threshold**2``."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    p = segment.points
    keep = (p * p).sum(axis=1) > threshold * threshold
    return Segment(segment.segment_index, p[keep], segment.indices[keep])


def segment_frame(frame: Frame, config: SegmentationConfig = SegmentationConfig()) -> list[Segment]:
    """Split, then null-filter each segment."""
    config.validate()
    return [remove_null_points(s, config.null_threshold) for s in split_frame(frame, config)]
