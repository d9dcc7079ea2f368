"""
One frame, stage by stage
=========================

Follow a single synthetic frame through segmentation, clustering,
association, Kalman tracking and selection, printing what each stage sees.
"""

import numpy as np

from mmprep import ingest
from mmprep.association import build_tracks
from mmprep.clustering import DbscanConfig, cluster_segment
from mmprep.segmentation import segment_frame
from mmprep.selection import keypoint_median, score_tracks, select_human, zero_out
from mmprep.tracking import KalmanParams, track_with_kf

# A stacked frame: 1100 slots holding a walking body, scattered clutter,
# two static reflectors and zero padding. The generator also returns labels
# saying where every slot came from, which we use to check the result.
scene = ingest.SceneConfig(num_frames=1, reflectors=2, vertical_sigma=0.3, seed=21)
frames, truth = ingest.synthesize_scene(scene)
frame = frames[0]
labels = truth.origin_labels[0]
print("slots:", frame.frame_size,
      "human", int((labels == ingest.HUMAN).sum()),
      "clutter", int((labels == ingest.CLUTTER).sum()),
      "padding", int((labels == ingest.PADDING).sum()))

# Five consecutive windows of 220 slots act as time steps. Padding sits at
# the origin and is dropped here.
segments = segment_frame(frame)
print("non-null points per segment:", [len(s) for s in segments])

# Height differences count for a quarter of their squared value, so a
# tall, thin body still forms a single cluster.
per_segment = [cluster_segment(s, DbscanConfig(eps=0.4, min_samples=6, alpha=0.25)).clusters
               for s in segments]
print("clusters per segment:", [len(c) for c in per_segment])

# Clusters are chained across segments by minimum-cost matching on
# centroid distance.
tracks = build_tracks(per_segment)
for t in tracks:
    human = sum(int((labels[n.cluster.indices] == ingest.HUMAN).sum()) for n in t.nodes)
    print(f"track {t.track_id}: segments {t.segments}, {t.point_count} points, {human} human")

# Each track is smoothed with a constant-velocity filter.
for t in tracks:
    track_with_kf(t, KalmanParams())

# The keypoint median stands in for the body position in every segment.
# The track closest to it (two ways of measuring) is kept.
median = keypoint_median(frame.keypoints)
scores = score_tracks(tracks, {s.segment_index: median for s in segments})
for s in scores:
    print(f"  track {s.track_id}: rmse {s.rmse:.3f}  median distance {s.median_distance:.3f}")
selection = select_human(scores, tracks)
print("selected tracks:", selection.selected_track_ids)

cleaned = zero_out(frame, selection)
kept = np.flatnonzero(np.any(cleaned.points != 0, axis=1))
print(f"kept {len(kept)} of {frame.frame_size} slots; "
      f"{(labels[kept] == ingest.HUMAN).mean():.1%} of them are human returns")
