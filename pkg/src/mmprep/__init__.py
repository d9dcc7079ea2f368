"""Preprocessing for sparse mmWave radar point clouds.

Segmentation and zero-padding removal, vertically weighted DBSCAN,
Hungarian association across segments, gated constant-velocity Kalman
tracking, and keypoint-based selection of the human cluster.
"""

from .association import build_tracks, centroid, cost_matrix, hungarian_assign
from .clustering import DbscanConfig, dbscan, largest_cluster, weighted_distance
from .core import TABLE_METHOD_SETS, Cluster, Frame, MethodSet, Segment, Track, squared_norm
from .ingest import FrameSet, SceneConfig, load_frames, synthesize_scene, write_frames
from .pipeline import PipelineConfig, benchmark, run_pipeline
from .segmentation import SegmentationConfig, remove_null_points, split_frame
from .selection import keypoint_median, rmse, score_tracks, select_human, zero_out
from .tracking import KalmanParams, kf_init, kf_predict, kf_update, track_with_kf
from .tuning import BoConfig, bayes_optimize, kf_objective, tune_kalman

__version__ = "0.1.0"
