import io

import numpy as np
import pytest

from conftest import milipoint_scene
from mmprep.core import TABLE_METHOD_SETS, Frame, MethodSet
from mmprep.ingest import HUMAN, FrameSet, SceneConfig, synthesize_scene
from mmprep.pipeline import (
    STAGES,
    PipelineConfig,
    benchmark,
    grid_clusters,
    run_pipeline,
    write_bench_csv,
)
from mmprep.segmentation import Segment


def kept(frame):
    return np.flatnonzero(np.any(frame.points != 0, axis=1))


@pytest.fixture(scope="module")
def scene():
    return synthesize_scene(SceneConfig(num_frames=4, reflectors=2, seed=11))


@pytest.mark.parametrize("ms", TABLE_METHOD_SETS, ids=lambda m: m.name)
def test_every_method_set_preserves_shape_and_points(scene, ms):
    fs, _ = scene
    out, rep = run_pipeline(fs, PipelineConfig(ms, emit_intermediates=True))
    assert len(out) == len(fs) and rep.frames_processed == len(fs)
    assert rep.methods == ms.name
    assert set(rep.per_stage_seconds) <= set(STAGES)
    for src, dst, res in zip(fs, out, rep.per_frame_outputs):
        assert dst.frame_id == src.frame_id and dst.frame_size == src.frame_size
        idx = kept(dst)
        np.testing.assert_array_equal(idx, res.retained_indices)
        np.testing.assert_array_equal(dst.points[idx], src.points[idx])
        # retained points are a subset of the non-null input
        assert np.all(np.sum(src.points[idx] ** 2, axis=1) > 0.001**2)
    assert rep.mean_retained_points == pytest.approx(np.mean(rep.retained_counts))


def test_ds_only_keeps_mostly_human():
    for seed in range(10):
        fs, truth = synthesize_scene(SceneConfig(num_frames=1, reflectors=0, seed=seed))
        out, _ = run_pipeline(fs, PipelineConfig(MethodSet.parse("ds")))
        idx = kept(out[0])
        assert len(idx) > 0
        assert (truth.origin_labels[0][idx] == HUMAN).mean() >= 0.9


def test_full_pipeline_beats_grid_proxy_on_human_recall():
    wins = 0
    for seed in range(50):
        fs, truth = synthesize_scene(milipoint_scene(seed))
        human = truth.origin_labels[0] == HUMAN
        full, _ = run_pipeline(fs, PipelineConfig())
        hg, _ = run_pipeline(fs, PipelineConfig(MethodSet.parse("hg")))
        wins += human[kept(full[0])].sum() > human[kept(hg[0])].sum()
    assert wins >= 40


def test_deterministic_and_worker_independent(scene):
    fs, _ = scene
    a, ra = run_pipeline(fs, PipelineConfig())
    b, rb = run_pipeline(fs, PipelineConfig(), workers=4)
    assert a == b
    assert ra.to_json() == rb.to_json()


def test_full_pipeline_without_keypoints_falls_back(scene):
    fs, _ = scene
    bare = FrameSet([Frame(f.frame_id, f.points) for f in fs], frame_size=fs.frame_size, num_keypoints=0)
    out, rep = run_pipeline(bare, PipelineConfig())
    assert rep.fallback_frames == len(fs)
    assert all(len(kept(f)) > 0 for f in out)


def test_all_padding_frame_is_zero():
    fs = FrameSet([Frame(0, np.zeros((1100, 3)))], frame_size=1100)
    for ms in TABLE_METHOD_SETS:
        out, rep = run_pipeline(fs, PipelineConfig(ms))
        assert not out[0].points.any() and rep.retained_counts == [0]


def test_empty_frameset_rejected():
    with pytest.raises(ValueError):
        run_pipeline(FrameSet([], frame_size=1100), PipelineConfig())


def test_report_json_has_no_timings_by_default(scene):
    _, rep = run_pipeline(scene[0], PipelineConfig())
    assert "per_stage_seconds" not in rep.to_json()
    assert "per_stage_seconds" in rep.to_json(include_timings=True)


def test_grid_clusters():
    pts = np.array([[0.1, 0.1, 0.0]] * 3 + [[0.2, 0.3, 1.4]] * 2 + [[5.1, 5.1, 0.0]] * 3)
    seg = Segment(2, pts, np.arange(10, 18))
    cl = grid_clusters(seg, 0.5, 3)
    sizes = sorted(c.size for c in cl)
    assert sizes == [3, 3]
    assert all(c.segment_index == 2 for c in cl)
    assert sorted(np.concatenate([c.indices for c in cl])) == [10, 11, 12, 15, 16, 17]


def test_benchmark_shape(scene):
    fs, _ = scene
    rows = benchmark(FrameSet(fs.frames[:2], frame_size=fs.frame_size), repetitions=3)
    names = list(dict.fromkeys(r.methods for r in rows))
    assert names == [m.name for m in TABLE_METHOD_SETS]
    assert all(r.per_frame_seconds > 0 and r.stage_seconds >= 0 for r in rows)
    stages = {n: {r.stage for r in rows if r.methods == n} for n in names}
    assert len(stages["DS+KM+HG"]) > len(stages["DS"])
    buf = io.StringIO()
    write_bench_csv(rows, buf)
    assert buf.getvalue().splitlines()[0] == "methods,per_frame_seconds,stage,stage_seconds"
    with pytest.raises(ValueError):
        benchmark(fs, repetitions=2)
