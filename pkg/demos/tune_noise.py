"""
Tuning the Kalman noise scales
==============================

Bayesian optimization searches (q, r, p0) to minimize the mean one-step
prediction error of the tracks found in a random subset of frames. The shipped
defaults are printed alongside for comparison.
"""

from mmprep.ingest import SceneConfig, synthesize_scene
from mmprep.tracking import KalmanParams
from mmprep.tuning import BoConfig, kf_objective, tune_kalman

frames, _ = synthesize_scene(SceneConfig(num_frames=24, trajectory="sinusoidal", seed=8))

# Scale parameters spanning four decades are easier to search in log space.
config = BoConfig(iterations=20, initial_samples=5, log_scale=True, seed=0)
trace, best = tune_kalman(frames, config, sample_size=16)

for i, (params, value, running) in enumerate(zip(trace.params, trace.values, trace.best_so_far()), 1):
    q, r, p0 = params
    print(f"{i:3d}  q={q:9.4f} r={r:8.5f} p0={p0:9.4f}  error={value:.4f}  best={running:.4f}")

print("tuned:   ", best)
print("objective with shipped defaults:", round(kf_objective(frames, KalmanParams(), sample_size=16), 4))
