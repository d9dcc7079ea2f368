"""Bayesian optimization of the Kalman noise scales.

The surrogate is a zero-mean Gaussian process on standardized objective
values with a squared-exponential kernel. Length scales come from a median
heuristic on the evaluated points in the unit cube, so there is no
hyperparameter fitting. Expected improvement is maximized by multistart
coordinate search.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.stats import norm

from .association import build_tracks
from .clustering import cluster_segment
from .ingest import FrameSet
from .pipeline import PipelineConfig
from .segmentation import segment_frame
from .tracking import KalmanParams, track_with_kf

DEFAULT_BOUNDS = ((0.01, 100.0), (0.001, 10.0), (0.01, 100.0))
KF_NAMES = ("q", "r", "p0")


@dataclass(frozen=True)
class BoConfig:
    bounds: tuple = DEFAULT_BOUNDS
    names: tuple = KF_NAMES
    iterations: int = 30
    initial_samples: int = 5
    seed: int = 0
    acquisition: str = "expected_improvement"
    # search each axis in log space (useful for scale parameters)
    log_scale: bool = False
    num_starts: int = 64
    noise: float = 1e-6

    def validate(self) -> "BoConfig":
        if len(self.names) != len(self.bounds):
            raise ValueError("names and bounds must have the same length")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"invalid bounds ({lo}, {hi})")
            if self.log_scale and lo <= 0:
                raise ValueError("log-scale bounds must be positive")
        if self.initial_samples < 1 or self.iterations < self.initial_samples:
            raise ValueError("need 1 <= initial_samples <= iterations")
        if self.acquisition != "expected_improvement":
            raise ValueError(f"unsupported acquisition {self.acquisition!r}")
        return self


@dataclass
class BoTrace:
    names: tuple
    params: list[np.ndarray] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    @property
    def evaluations(self) -> list[tuple[np.ndarray, float]]:
        return list(zip(self.params, self.values))

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.values))

    @property
    def best(self) -> tuple[np.ndarray, float]:
        i = self.best_index
        return self.params[i], self.values[i]

    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(np.asarray(self.values, dtype=np.float64))

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", *self.names, "objective", "best_so_far"])
        for i, (p, v, b) in enumerate(zip(self.params, self.values, self.best_so_far()), start=1):
            w.writerow([i, *(repr(float(x)) for x in p), repr(float(v)), repr(float(b))])


def latin_hypercube(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    cut = (np.arange(n)[:, None] + rng.random((n, dim))) / n
    for d in range(dim):
        cut[:, d] = cut[rng.permutation(n), d]
    return cut


def median_length_scales(X: np.ndarray, floor: float = 1e-2) -> np.ndarray:
    """Median heuristic with per-dimension shape.

    The overall scale is the median pairwise Euclidean distance; each axis is
    stretched by its own median pairwise spread relative to the RMS of those
    spreads. On isotropic designs every axis gets the plain median distance.
    """
    n, dim = X.shape
    if n < 2:
        return np.full(dim, 0.5)
    iu = np.triu_indices(n, k=1)
    diffs = np.abs(X[:, None, :] - X[None, :, :])[iu]
    base = np.median(np.sqrt((diffs * diffs).sum(axis=1)))
    per_axis = np.maximum(np.median(diffs, axis=0), floor)
    shape = per_axis / np.sqrt(np.mean(per_axis**2))
    return np.maximum(base * shape, floor)


class GaussianProcess:
    def __init__(self, X: np.ndarray, y: np.ndarray, noise: float = 1e-6):
        self.X = X
        self.y_mean = float(y.mean())
        sd = float(y.std())
        self.y_sd = sd if sd > 0 else 1.0
        self.ys = (y - self.y_mean) / self.y_sd
        self.length_scales = median_length_scales(X)
        K = self._kernel(X, X) + noise * np.eye(len(X))
        self._chol = cho_factor(K, lower=True)
        self._alpha = cho_solve(self._chol, self.ys)

    def _kernel(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        d = (A[:, None, :] - B[None, :, :]) / self.length_scales
        return np.exp(-0.5 * (d * d).sum(axis=2))

    def predict(self, Xs: np.ndarray):
        """Posterior mean and std on the standardized scale."""
        ks = self._kernel(Xs, self.X)
        mu = ks @ self._alpha
        v = cho_solve(self._chol, ks.T)
        var = np.maximum(1.0 - (ks * v.T).sum(axis=1), 1e-12)
        return mu, np.sqrt(var)

    def expected_improvement(self, Xs: np.ndarray) -> np.ndarray:
        best = self.ys.min()
        mu, sd = self.predict(Xs)
        z = (best - mu) / sd
        return (best - mu) * norm.cdf(z) + sd * norm.pdf(z)


def maximize_ei(gp: GaussianProcess, starts: np.ndarray, sweeps: int = 4, grid: int = 21) -> np.ndarray:
    """Coordinate search on EI from every start at once; returns the points
    sorted by decreasing EI."""
    X = starts.copy()
    S, D = X.shape
    for k in range(sweeps):
        half = 0.5 / 3**k
        offsets = np.linspace(-half, half, grid)
        for d in range(D):
            cand = np.repeat(X[:, None, :], grid + 1, axis=1)
            if k == 0:
                cand[:, :grid, d] = np.linspace(0.0, 1.0, grid)[None, :]
            else:
                cand[:, :grid, d] = np.clip(X[:, d:d + 1] + offsets[None, :], 0.0, 1.0)
            ei = gp.expected_improvement(cand.reshape(-1, D)).reshape(S, grid + 1)
            X = cand[np.arange(S), ei.argmax(axis=1)]
    ei = gp.expected_improvement(X)
    return X[np.argsort(-ei, kind="stable")]


def bayes_optimize(objective: Callable[[np.ndarray], float], config: BoConfig = BoConfig()) -> BoTrace:
    """Minimize ``objective`` over the configured box.

    ``objective`` receives parameters in original units. NaN results are
    recorded as ``inf`` and left out of the surrogate.
    """
    cfg = config.validate()
    rng = np.random.default_rng(cfg.seed)
    lo = np.array([b[0] for b in cfg.bounds], dtype=np.float64)
    hi = np.array([b[1] for b in cfg.bounds], dtype=np.float64)
    if cfg.log_scale:
        lo, hi = np.log(lo), np.log(hi)
    dim = len(lo)

    def to_params(u: np.ndarray) -> np.ndarray:
        x = lo + u * (hi - lo)
        x = np.exp(x) if cfg.log_scale else x
        return np.clip(x, [b[0] for b in cfg.bounds], [b[1] for b in cfg.bounds])

    trace = BoTrace(tuple(cfg.names))
    U: list[np.ndarray] = []
    initial = latin_hypercube(cfg.initial_samples, dim, rng)
    for it in range(cfg.iterations):
        if it < cfg.initial_samples:
            u = initial[it]
        else:
            u = _propose(U, trace.values, rng, cfg)
        x = to_params(u)
        y = float(objective(x))
        if math.isnan(y):
            y = math.inf
        U.append(u)
        trace.params.append(x)
        trace.values.append(y)
    return trace


def _propose(U, values, rng: np.random.Generator, cfg: BoConfig) -> np.ndarray:
    dim = len(cfg.bounds)
    starts = rng.random((cfg.num_starts, dim))
    vals = np.asarray(values)
    ok = np.isfinite(vals)
    if ok.sum() < 2:
        return starts[0]
    X = np.asarray(U)[ok]
    gp = GaussianProcess(X, vals[ok], cfg.noise)
    starts[0] = X[np.argmin(vals[ok])]
    for cand in maximize_ei(gp, starts):
        if np.min(np.abs(np.asarray(U) - cand).max(axis=1)) > 1e-9:
            return cand
    return rng.random(dim)


def random_search(objective: Callable[[np.ndarray], float], bounds: Sequence, budget: int, seed: int) -> BoTrace:
    """Uniform random baseline with the same trace shape as BO."""
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in bounds], dtype=np.float64)
    hi = np.array([b[1] for b in bounds], dtype=np.float64)
    trace = BoTrace(tuple(f"x{i}" for i in range(len(lo))))
    for _ in range(budget):
        x = lo + rng.random(len(lo)) * (hi - lo)
        trace.params.append(x)
        trace.values.append(float(objective(x)))
    return trace


# --------------------------------------------------------------------------
# Kalman objective


class KalmanObjective:
    """Mean Kalman prediction error over a fixed random subset of frames.

    Segmentation, clustering and association do not depend on the noise
    scales, so their tracks are built once at construction.
    """

    def __init__(self, frames: FrameSet, config: PipelineConfig = PipelineConfig(),
                 sample_size: int = 32, seed: int = 0):
        if len(frames) == 0:
            raise ValueError("objective needs at least one frame")
        rng = np.random.default_rng(seed)
        n = min(sample_size, len(frames))
        picks = np.sort(rng.choice(len(frames), size=n, replace=False))
        self.frame_ids = [frames[i].frame_id for i in picks]
        self.base = config.kalman
        self.tracks = []
        for i in picks:
            segs = segment_frame(frames[i], config.segmentation)
            per_seg = [cluster_segment(s, config.dbscan).clusters for s in segs]
            self.tracks.extend(t for t in build_tracks(per_seg) if len(t) >= 2)

    def __call__(self, params: KalmanParams) -> float:
        if not self.tracks:
            raise ValueError("objective undefined: no tracks")
        errors = []
        for t in self.tracks:
            _, recs = track_with_kf(t, params)
            errors.extend(r.prediction_error for r in recs if r.had_observation)
        if not errors:
            raise ValueError("objective undefined: no tracks")
        return float(np.mean(errors))

    def from_vector(self, x: np.ndarray) -> float:
        q, r, p0 = (float(v) for v in x)
        return self(KalmanParams(q, r, p0, self.base.gate, self.base.dt))


def kf_objective(frames: FrameSet, params: KalmanParams, pipeline_config: PipelineConfig = PipelineConfig(),
                 sample_size: int = 32, seed: int = 0) -> float:
    return KalmanObjective(frames, pipeline_config, sample_size, seed)(params)


def tune_kalman(frames: FrameSet, config: BoConfig = BoConfig(log_scale=True),
                pipeline_config: PipelineConfig = PipelineConfig(), sample_size: int = 32):
    """Run BO over (q, r, p0); returns ``(trace, best KalmanParams)``."""
    obj = KalmanObjective(frames, pipeline_config, sample_size, config.seed)
    trace = bayes_optimize(obj.from_vector, config)
    q, r, p0 = (float(v) for v in trace.best[0])
    base = pipeline_config.kalman
    return trace, KalmanParams(q, r, p0, base.gate, base.dt)
