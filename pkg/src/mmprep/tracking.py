"""Planar constant-velocity Kalman filter over track centroids.

State is ``[x, y, vx, vy]``, observation ``[x, y]``. The scalar noise settings
expand isotropically: ``Q = q*I4``, ``R = r*I2``, ``P0 = p0*I4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Track

H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class KalmanParams:
    q: float = 29.41
    r: float = 0.081
    p0: float = 14.64
    gate: float = 2.0
    dt: float = 1.0

    def validate(self) -> "KalmanParams":
        for name in ("q", "r", "p0", "gate", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        return self


@dataclass
class KalmanState:
    x: np.ndarray
    P: np.ndarray

    @property
    def position(self) -> np.ndarray:
        return self.x[:2]


@dataclass
class StepRecord:
    segment_index: int
    predicted_xy: np.ndarray
    observed_xy: Optional[np.ndarray]
    filtered_xy: np.ndarray
    # norm of the 4-d correction the update applied to the prediction
    state_change: float
    prediction_error: float
    # the track had a node here, whether or not it passed the gate
    had_observation: bool = False


def transition(dt: float) -> np.ndarray:
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    return F


def kf_init(first_observation, params: KalmanParams = KalmanParams()) -> KalmanState:
    z = np.asarray(first_observation, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(z)):
        raise ValueError("observation must be finite")
    return KalmanState(np.array([z[0], z[1], 0.0, 0.0]), params.p0 * np.eye(4))


def kf_predict(state: KalmanState, params: KalmanParams = KalmanParams()) -> KalmanState:
    F = transition(params.dt)
    P = F @ state.P @ F.T + params.q * np.eye(4)
    return KalmanState(F @ state.x, 0.5 * (P + P.T))


def kf_update(state: KalmanState, observation, params: KalmanParams = KalmanParams()):
    """Measurement update; returns ``(new_state, innovation)``."""
    z = np.asarray(observation, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(z)):
        raise ValueError("observation must be finite")
    innovation = z - H @ state.x
    S = H @ state.P @ H.T + params.r * np.eye(2)
    try:
        K = np.linalg.solve(S, H @ state.P).T
    except np.linalg.LinAlgError as exc:
        raise ValueError("innovation covariance is singular") from exc
    x = state.x + K @ innovation
    P = (np.eye(4) - K @ H) @ state.P
    return KalmanState(x, 0.5 * (P + P.T)), innovation


def track_with_kf(track: Track, params: KalmanParams = KalmanParams()):
    """Filter a track's xy centroids segment by segment.

    Segments between the first and last node are visited in order. A missing
    node, or one farther than ``params.gate`` from the prediction, makes that
    step coast on the prediction. Fills ``track.kalman_history`` and returns
    ``(track, step_records)``.
    """
    if not track.nodes:
        raise ValueError(f"track {track.track_id} has no nodes")
    params.validate()
    first = track.nodes[0]
    state = kf_init(first.centroid[:2], params)
    history = [(first.segment_index, state.position.copy(), state.position.copy(), 0.0)]
    records: list[StepRecord] = []
    for seg in range(first.segment_index + 1, track.nodes[-1].segment_index + 1):
        pred = kf_predict(state, params)
        predicted = pred.position.copy()
        node = track.node_at(seg)
        observed = None
        error = 0.0
        innov_norm = 0.0
        if node is not None:
            obs = node.centroid[:2]
            error = float(math.hypot(*(obs - predicted)))
            if error <= params.gate:
                observed = obs.copy()
        if observed is not None:
            state, innov = kf_update(pred, observed, params)
            innov_norm = float(np.linalg.norm(innov))
        else:
            state = pred
        filtered = state.position.copy()
        records.append(
            StepRecord(seg, predicted, observed, filtered,
                       float(np.linalg.norm(state.x - pred.x)), error, node is not None)
        )
        history.append((seg, predicted, filtered, innov_norm))
    track.kalman_history = history
    return track, records


def filtered_positions(track: Track) -> dict[int, np.ndarray]:
    if track.kalman_history is None:
        raise ValueError(f"track {track.track_id} has not been filtered")
    return {seg: filt for seg, _, filt, _ in track.kalman_history}


def mean_prediction_error(records) -> float:
    """Mean error over steps that had an observation; ``inf`` when there are none."""
    errs = [r.prediction_error for r in records if r.had_observation]
    return float(np.mean(errs)) if errs else math.inf
