"""Constant turn rate and acceleration (CTRA) kinematics.

The closed-form planar CTRA transition over an interval dt is

    theta(dt) = theta0 + omega * dt
    s(dt)     = s0 + a * dt
    dx        = integral of s(t) * cos(theta0 + omega * t)
    dy        = integral of s(t) * sin(theta0 + omega * t)

evaluated analytically.  The translation integrals are computed here in a
half-angle regrouping that is algebraically identical to the familiar
1/omega^2 form but avoids the catastrophic cancellation that form suffers
for small |omega| (the raw expression differences terms of size ~|a| to
produce a result of size ~omega^2, which costs ~|a|*eps/omega^2 meters of
rounding noise).  Below ``OMEGA_EPS`` the first-order-in-omega series limit
is used instead; the two branches agree to well below 1e-6 m at the
threshold.

Target motion compensation translates a detection from its capture time
back to the annotation reference time by subtracting the object's own
displacement over the point's time offset.  The displacement is the pure
translation of the box center; dt may be negative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2, angle_diff
from .sceneio import TimedPoint

OMEGA_EPS = 1e-4  # rad/s; below this the series limit of the closed form is used


@dataclass(frozen=True)
class TrackState:
    """Box state at a reference time: pose plus dynamics along the box x-axis."""

    pose: Pose2
    speed: float
    yaw_rate: float
    accel: float

    def __post_init__(self) -> None:
        for name in ("speed", "yaw_rate", "accel"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class StateDelta:
    """State increment over an interval; yaw rate and acceleration are constant."""

    dx: float
    dy: float
    dtheta: float
    ds: float
    domega: float = 0.0
    da: float = 0.0


def _displacement(theta: float, speed: float, yaw_rate: float, accel: float, dt: float):
    """Translation of the box center over dt; scalar closed form."""
    if abs(yaw_rate) < OMEGA_EPS:
        cos_t = math.cos(theta)
        sin_t = math.sin(theta)
        c1 = speed * dt + 0.5 * accel * dt * dt
        c2 = yaw_rate * (0.5 * speed * dt * dt + accel * dt * dt * dt / 3.0)
        return c1 * cos_t - c2 * sin_t, c1 * sin_t + c2 * cos_t
    dth = yaw_rate * dt
    half = 0.5 * dth
    sin_half = math.sin(half)
    sinc_half = sin_half / half if half != 0.0 else 1.0
    cos_m = math.cos(theta + half)
    sin_m = math.sin(theta + half)
    a_term = dth * math.cos(half) - 2.0 * sin_half  # ~ -dth^3 / 12
    b_term = dth * sin_half
    lin = speed * dt * sinc_half
    rot = accel / (yaw_rate * yaw_rate)
    dx = lin * cos_m + rot * (sin_m * a_term + cos_m * b_term)
    dy = lin * sin_m + rot * (-cos_m * a_term + sin_m * b_term)
    return dx, dy


def _displacement_array(state: TrackState, dts: np.ndarray):
    """Vectorized ``_displacement`` for one state over an array of offsets."""
    theta = state.pose.theta
    speed = state.speed
    yaw_rate = state.yaw_rate
    accel = state.accel
    if abs(yaw_rate) < OMEGA_EPS:
        cos_t = math.cos(theta)
        sin_t = math.sin(theta)
        c1 = speed * dts + 0.5 * accel * dts * dts
        c2 = yaw_rate * (0.5 * speed * dts * dts + accel * dts * dts * dts / 3.0)
        return c1 * cos_t - c2 * sin_t, c1 * sin_t + c2 * cos_t
    dth = yaw_rate * dts
    half = 0.5 * dth
    sin_half = np.sin(half)
    sinc_half = np.sinc(half / np.pi)
    cos_m = np.cos(theta + half)
    sin_m = np.sin(theta + half)
    a_term = dth * np.cos(half) - 2.0 * sin_half
    b_term = dth * sin_half
    lin = speed * dts * sinc_half
    rot = accel / (yaw_rate * yaw_rate)
    dx = lin * cos_m + rot * (sin_m * a_term + cos_m * b_term)
    dy = lin * sin_m + rot * (-cos_m * a_term + sin_m * b_term)
    return dx, dy


def ctra_delta(state: TrackState, dt: float) -> StateDelta:
    """State increment from ``state`` over ``dt`` under constant omega and a."""
    dx, dy = _displacement(state.pose.theta, state.speed, state.yaw_rate, state.accel, dt)
    return StateDelta(dx=dx, dy=dy, dtheta=state.yaw_rate * dt, ds=state.accel * dt)


def ctra_predict(state: TrackState, dt: float) -> TrackState:
    """Advance ``state`` by ``dt`` (negative dt evaluates backwards)."""
    delta = ctra_delta(state, dt)
    return TrackState(
        pose=Pose2(
            state.pose.x + delta.dx,
            state.pose.y + delta.dy,
            state.pose.theta + delta.dtheta,
        ),
        speed=state.speed + delta.ds,
        yaw_rate=state.yaw_rate,
        accel=state.accel,
    )


def ctra_residual(predicted: TrackState, actual: TrackState) -> np.ndarray:
    """Componentwise actual - predicted; the heading term is wrapped."""
    return np.array([
        actual.pose.x - predicted.pose.x,
        actual.pose.y - predicted.pose.y,
        angle_diff(actual.pose.theta, predicted.pose.theta),
        actual.speed - predicted.speed,
        actual.yaw_rate - predicted.yaw_rate,
        actual.accel - predicted.accel,
    ])


def compensate_xy(points_xy: np.ndarray, dts: np.ndarray, state: TrackState) -> np.ndarray:
    """Translate (N, 2) points from their capture times to the reference time.

    ``state`` is the object's state at the reference time; each point moves
    back by the object's displacement over its own dt.
    """
    dx, dy = _displacement_array(state, dts)
    out = np.empty_like(points_xy, dtype=np.float64)
    out[:, 0] = points_xy[:, 0] - dx
    out[:, 1] = points_xy[:, 1] - dy
    return out


def compensate_point(point: TimedPoint, state: TrackState) -> TimedPoint:
    """Single-point target motion compensation; z and dt pass through."""
    dx, dy = _displacement(
        state.pose.theta, state.speed, state.yaw_rate, state.accel, point.dt
    )
    return TimedPoint(point.x - dx, point.y - dy, point.z, point.dt)
