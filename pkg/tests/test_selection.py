import io
import math

import numpy as np
import pytest

from mmprep.core import Cluster, Frame, Track, TrackNode
from mmprep.selection import (
    Selection,
    TrackScore,
    fallback_selection,
    keypoint_median,
    rmse,
    score_tracks,
    select_human,
    write_scores_csv,
    zero_out,
)
from mmprep.tracking import KalmanParams, track_with_kf


def make_track(tid, centroids, first_index=0, size=1):
    t = Track(tid)
    for seg, c in enumerate(centroids):
        c = np.asarray(c, dtype=float)
        idx = np.arange(size) + first_index + seg * 100
        t.append(TrackNode(seg, Cluster(0, seg, np.tile(c, (size, 1)), idx), c))
    track_with_kf(t, KalmanParams(gate=np.inf))
    return t


def test_rmse_examples():
    assert rmse([[0, 0]], [[3, 4]]) == 5.0
    assert rmse([[1, 1], [2, 2]], [[1, 1], [2, 2]]) == 0.0
    # distances 0, 1, 4 (hand computed): sqrt((0 + 1 + 16) / 3)
    got = rmse([[0, 0], [1, 0], [0, 4]], [[0, 0], [0, 0], [0, 0]])
    assert got == pytest.approx(math.sqrt(17 / 3), abs=1e-12)
    assert rmse([[1, 0], [0, 5], [0, 0]], [[0, 0], [0, 0], [0, 0]]) == pytest.approx(math.sqrt(26 / 3))


def test_rmse_rejects_mismatch_and_empty():
    with pytest.raises(ValueError):
        rmse([[0, 0]], [[0, 0], [1, 1]])
    with pytest.raises(ValueError):
        rmse(np.zeros((0, 2)), np.zeros((0, 2)))


def test_keypoint_median():
    kp = [[0, 0, 0], [1, 5, 2], [2, 1, 9]]
    np.testing.assert_array_equal(keypoint_median(kp), [1, 1, 2])
    np.testing.assert_array_equal(keypoint_median([[1, 2, 3], [3, 4, 5]]), [2, 3, 4])
    with pytest.raises(ValueError):
        keypoint_median(np.zeros((0, 3)))


def test_median_robust_to_one_outlier(rng):
    kp = rng.normal(size=(17, 3))
    base = keypoint_median(kp)
    kp2 = kp.copy()
    kp2[0] = [1e6, -1e6, 1e6]
    assert np.linalg.norm(keypoint_median(kp2) - base) < 1.0


def test_selects_track_on_ground_truth():
    gt = [np.array([k * 0.2, 0.0, 1.0]) for k in range(5)]
    human = make_track(0, [g + 0.01 for g in gt])
    far = make_track(1, [g + [3.0, 0, 0] for g in gt], first_index=50)
    scores = score_tracks([human, far], gt)
    sel = select_human(scores, [human, far])
    assert sel.selected_track_ids == [0]
    np.testing.assert_array_equal(np.sort(sel.retained_indices), [k * 100 for k in range(5)])
    assert not sel.fallback


def test_two_criteria_can_pick_two_tracks():
    gt = {0: np.array([0.0, 0, 1]), 1: np.array([0.0, 0, 1]), 2: np.array([0.0, 0, 1])}
    # track 0 close in xy but far in z; track 1 the other way around
    a = make_track(0, [[0.05, 0, 5.0]] * 3)
    b = make_track(1, [[0.3, 0, 1.0]] * 3, first_index=10)
    scores = score_tracks([a, b], gt)
    s = {x.track_id: x for x in scores}
    assert s[0].rmse < s[1].rmse and s[1].median_distance < s[0].median_distance
    assert select_human(scores, [a, b]).selected_track_ids == [0, 1]


def test_ties_go_to_lower_id():
    scores = [TrackScore(4, 1.0, 1.0), TrackScore(2, 1.0, 1.0)]
    t2, t4 = make_track(2, [[0, 0, 0]]), make_track(4, [[0, 0, 0]], first_index=5)
    assert select_human(scores, [t4, t2]).selected_track_ids == [2]


def test_track_without_ground_truth_is_skipped():
    t = make_track(0, [[0, 0, 0], [0, 0, 0]])
    with pytest.warns(UserWarning):
        assert score_tracks([t], {7: np.zeros(3)}) == []


def test_select_needs_scores():
    with pytest.raises(ValueError):
        select_human([], [])


def test_fallback_prefers_longest_then_largest():
    a = make_track(0, [[0, 0, 0]] * 2, size=5)
    b = make_track(1, [[1, 0, 0]] * 3, first_index=10, size=1)
    c = make_track(2, [[2, 0, 0]] * 3, first_index=20, size=2)
    sel = fallback_selection([a, b, c])
    assert sel.selected_track_ids == [2] and sel.fallback
    assert fallback_selection([]) is None


def test_zero_out():
    pts = np.arange(1, 31, dtype=float).reshape(10, 3)
    f = Frame(3, pts, action_label=7)
    out = zero_out(f, [1, 4])
    assert out.frame_size == 10 and out.frame_id == 3 and out.action_label == 7
    np.testing.assert_array_equal(out.points[[1, 4]], pts[[1, 4]])
    mask = np.ones(10, bool)
    mask[[1, 4]] = False
    assert not out.points[mask].any()
    assert not zero_out(f, []).points.any()
    np.testing.assert_array_equal(zero_out(f, np.arange(10)).points, pts)
    sel = Selection([0], np.array([2]), pts[[2]])
    np.testing.assert_array_equal(zero_out(f, sel).points[2], pts[2])


def test_selection_translation_invariant(rng):
    gt = [np.array([k * 0.3, 0.1 * k, 1.0]) for k in range(5)]
    tracks = [make_track(i, [g + rng.normal(size=3) * (0.1 + i) for g in gt], first_index=10 * i)
              for i in range(4)]
    base = select_human(score_tracks(tracks, gt), tracks).selected_track_ids
    shift = np.array([5.0, -7.0, 2.0])
    moved = [make_track(t.track_id, [n.centroid + shift for n in t.nodes], first_index=10 * t.track_id)
             for t in tracks]
    got = select_human(score_tracks(moved, [g + shift for g in gt]), moved).selected_track_ids
    assert got == base


def test_scores_csv():
    buf = io.StringIO()
    write_scores_csv([TrackScore(0, 0.5, 1.25), TrackScore(1, 2.0, 3.0)], [1], buf)
    assert buf.getvalue().splitlines() == [
        "track_id,rmse,median_distance,selected", "0,0.5,1.25,0", "1,2.0,3.0,1"]
