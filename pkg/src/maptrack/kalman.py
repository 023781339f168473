"""Covariance-adaptive Kalman filter over ``(x, y, w, h, vx, vy)``.

The state holds the box center, width and height plus the center velocity.
Size velocities are deliberately absent so that long coasting periods cannot
inflate or shrink a box without bound.

Two things differ from a textbook constant-velocity filter:

* the measurement covariance of every update is multiplied by a factor chosen
  from how much the detected box area differs from the predicted one
  (:func:`deformation_ratio`, :func:`covariance_multiplier`);
* the velocity is not estimated through the gain. It is an exponential moving
  average of per-frame center displacements (:func:`smooth_velocity`) that is
  written into the posterior mean after each update.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .geometry import BoundingBox

NDIM = 6
MDIM = 4

TrackClass = Literal["normal", "predicted"]


class KalmanError(RuntimeError):
    """Raised when the filter reaches a numerically corrupt state."""


@dataclass(frozen=True)
class NoiseConfig:
    # std factors, multiplied by the current box height
    measurement_std: tuple[float, ...] = (1 / 20, 1 / 20, 1 / 20, 1 / 20)
    process_std: tuple[float, ...] = (1 / 20, 1 / 20, 1 / 20, 1 / 20, 1 / 160, 1 / 160)
    init_std: tuple[float, ...] = (2 / 20, 2 / 20, 1 / 10, 1 / 10, 10 / 20, 10 / 20)
    # deformation coefficients for tentative / normal tracks
    coef1: float = 15.0
    coef2: float = 9.0
    coef3: float = 6.0
    # deformation coefficients for predicted tracks being re-associated
    pred_coef1: float = 9.0
    pred_coef2: float = 6.0
    pred_coef3: float = 3.0
    beta: float = 0.9
    dt: float = 1.0

    def __post_init__(self):
        if len(self.measurement_std) != MDIM:
            raise ValueError("measurement_std needs 4 entries")
        if len(self.process_std) != NDIM or len(self.init_std) != NDIM:
            raise ValueError("process_std and init_std need 6 entries")
        for name, coefs in (
            ("normal", (self.coef1, self.coef2, self.coef3)),
            ("predicted", (self.pred_coef1, self.pred_coef2, self.pred_coef3)),
        ):
            if not coefs[0] >= coefs[1] >= coefs[2] >= 1.0:
                raise ValueError(f"{name} coefficients must satisfy coef1 >= coef2 >= coef3 >= 1")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must lie in [0, 1)")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    def coefficients(self, track_class: TrackClass) -> tuple[float, float, float]:
        if track_class == "normal":
            return (self.coef1, self.coef2, self.coef3)
        if track_class == "predicted":
            return (self.pred_coef1, self.pred_coef2, self.pred_coef3)
        raise ValueError(f"unknown track class {track_class!r}")


@dataclass(frozen=True)
class KalmanTrackState:
    mean: np.ndarray
    covariance: np.ndarray
    smoothed_velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    # posterior center of the previous frame, the reference point for displacement
    last_center: np.ndarray | None = None
    # False until the first displacement has been observed
    velocity_measured: bool = False

    def box(self) -> BoundingBox:
        x, y, w, h = self.mean[:4]
        return BoundingBox.from_center(x, y, w, h)

    def box_array(self) -> np.ndarray:
        x, y, w, h = self.mean[:4]
        return np.array([x - w / 2.0, y - h / 2.0, w, h])

    def center(self) -> np.ndarray:
        return self.mean[:2].copy()


def _transition(dt: float) -> np.ndarray:
    F = np.eye(NDIM)
    F[0, 4] = dt
    F[1, 5] = dt
    return F


_H = np.eye(MDIM, NDIM)
_MIN_SIZE = 1e-2


def init_state(box: BoundingBox, noise: NoiseConfig = NoiseConfig()) -> KalmanTrackState:
    cx, cy = box.center()
    mean = np.array([cx, cy, box.width, box.height, 0.0, 0.0])
    std = np.asarray(noise.init_std) * box.height
    return KalmanTrackState(
        mean=mean,
        covariance=np.diag(std**2),
        smoothed_velocity=np.zeros(2),
        last_center=mean[:2].copy(),
    )


def predict(state: KalmanTrackState, noise: NoiseConfig = NoiseConfig()) -> KalmanTrackState:
    F = _transition(noise.dt)
    h = state.mean[3]
    Q = np.diag((np.asarray(noise.process_std) * h) ** 2)
    mean = F @ state.mean
    cov = F @ state.covariance @ F.T + Q
    return replace(state, mean=mean, covariance=cov, last_center=state.mean[:2].copy())


def deformation_ratio(predicted_box: BoundingBox, detected_box: BoundingBox) -> float:
    """Detected area over predicted area; 1 means the detection kept its size."""
    return detected_box.area() / predicted_box.area()


def covariance_multiplier(d: float, track_class: TrackClass = "normal", noise: NoiseConfig = NoiseConfig()) -> float:
    """Measurement covariance factor for a deformation ratio ``d``.

    Bands are mirrored around the trusted interval [0.8, 1.2], where the factor
    is 1. Band edges belong to the band closer to 1 (the milder coefficient).
    """
    if not d > 0:
        raise ValueError(f"deformation ratio must be positive, got {d}")
    coef1, coef2, coef3 = noise.coefficients(track_class)
    if 0.8 <= d <= 1.2:
        return 1.0
    if 0.7 <= d < 0.8 or 1.2 < d <= 1.3:
        return coef3
    if 0.6 <= d < 0.7 or 1.3 < d <= 1.4:
        return coef2
    return coef1


def smooth_velocity(prev_smoothed, prev_center, det_center, noise: NoiseConfig = NoiseConfig()) -> np.ndarray:
    instantaneous = (np.asarray(det_center, float) - np.asarray(prev_center, float)) / noise.dt
    return noise.beta * np.asarray(prev_smoothed, float) + (1.0 - noise.beta) * instantaneous


def update(
    state: KalmanTrackState,
    detected_box: BoundingBox,
    multiplier: float = 1.0,
    noise: NoiseConfig = NoiseConfig(),
) -> KalmanTrackState:
    """Correct ``state`` with a detection, scaling R by ``multiplier``.

    ``state`` must already have been through :func:`predict` this frame, so
    that ``state.last_center`` is the previous frame's posterior center.
    """
    if multiplier < 1.0:
        raise ValueError("multiplier must be >= 1")
    cx, cy = detected_box.center()
    z = np.array([cx, cy, detected_box.width, detected_box.height])

    h = state.mean[3]
    R = np.diag((np.asarray(noise.measurement_std) * h) ** 2) * multiplier
    P = state.covariance
    S = P[:MDIM, :MDIM] + R
    PHt = P[:, :MDIM]
    try:
        K = np.linalg.solve(S, PHt.T).T
    except np.linalg.LinAlgError as exc:
        raise KalmanError(f"innovation covariance is singular: {exc}") from exc
    if not np.all(np.isfinite(K)):
        raise KalmanError("non-finite Kalman gain")

    mean = state.mean + K @ (z - state.mean[:MDIM])
    # Joseph form keeps the posterior symmetric PSD
    I_KH = np.eye(NDIM) - K @ _H
    cov = I_KH @ P @ I_KH.T + K @ R @ K.T
    cov = 0.5 * (cov + cov.T)

    prev_center = state.last_center if state.last_center is not None else state.mean[:2]
    if state.velocity_measured:
        velocity = smooth_velocity(state.smoothed_velocity, prev_center, (cx, cy), noise)
    else:
        # no earlier velocity to blend with: the first displacement seeds the average
        velocity = (np.array([cx, cy]) - prev_center) / noise.dt
    mean[4:6] = velocity
    mean[2] = max(mean[2], _MIN_SIZE)
    mean[3] = max(mean[3], _MIN_SIZE)
    return KalmanTrackState(
        mean=mean,
        covariance=cov,
        smoothed_velocity=velocity,
        last_center=state.last_center,
        velocity_measured=True,
    )
