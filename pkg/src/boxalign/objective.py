"""The per-track objective: motion, sensor, and ego-distance terms.

For a track with states X_1..X_N the total cost is

    sum over edges of   r_i' B_m r_i          (CTRA consistency)
  + sum over samples of b_s * (inlier + fit)  (sensor evidence)
  + sum over samples of -b_d * |xy - ego_xy|  (tie-break away from ego)

where r_i is the wrapped residual between the CTRA prediction from node i
and the variable at node i+1.  The sensor terms evaluate the candidate box
(original dims, candidate pose) against its associated detections after
compensating them with the candidate dynamics: ``inlier`` is one minus the
fraction of compensated points inside the footprint, and ``fit`` is the
mean of (2 * min(u, v, 1-u, 1-v))^2, which is 0 for points on a face, 1 at
the centroid, and grows quadratically without bound outside the box.

A box with no associated detections contributes zero sensor cost: with no
evidence it is governed by the motion model alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .association import AssociatedCloud
from .geometry import BoxDims, Pose2, box_frame_coords
from .motion import TrackState, compensate_xy, ctra_predict, ctra_residual


class LengthMismatch(ValueError):
    pass


def default_motion_weight(annotation_frequency: float) -> np.ndarray:
    """Default inverse covariance for the motion term: 10 * f_a * I6."""
    return 10.0 * annotation_frequency * np.eye(6)


@dataclass
class ObjectiveConfig:
    """Weights of the three cost terms.

    ``motion_weight_matrix`` defaults to ``10 * annotation_frequency * I6``;
    any symmetric positive semi-definite 6x6 matrix is accepted.
    """

    annotation_frequency: float
    motion_weight_matrix: np.ndarray = None  # type: ignore[assignment]
    sensor_weight: float = 1.0e3
    ego_weight: float = 1.0e-4  # 1/meters

    def __post_init__(self) -> None:
        if not (math.isfinite(self.annotation_frequency) and self.annotation_frequency > 0):
            raise ValueError("annotation_frequency must be finite and > 0")
        if self.motion_weight_matrix is None:
            self.motion_weight_matrix = default_motion_weight(self.annotation_frequency)
        m = np.asarray(self.motion_weight_matrix, dtype=np.float64)
        if m.shape != (6, 6):
            raise ValueError("motion_weight_matrix must be 6x6")
        if not np.allclose(m, m.T, atol=1e-12):
            raise ValueError("motion_weight_matrix must be symmetric")
        if np.linalg.eigvalsh(m).min() < -1e-9 * max(1.0, np.abs(m).max()):
            raise ValueError("motion_weight_matrix must be positive semi-definite")
        self.motion_weight_matrix = m


@dataclass(frozen=True)
class TrackVariables:
    """The joint optimization variable of one track: one state per sample."""

    states: tuple[TrackState, ...]
    timestamps: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "timestamps", tuple(float(t) for t in self.timestamps))
        if len(self.states) < 2:
            raise ValueError("a track needs at least two states")
        if len(self.states) != len(self.timestamps):
            raise ValueError("states and timestamps must have equal length")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if not b > a:
                raise ValueError("timestamps must be strictly increasing")


def motion_cost(variables: TrackVariables, config: ObjectiveConfig) -> float:
    """Sum of weighted squared CTRA prediction residuals along the track."""
    weight = config.motion_weight_matrix
    total = 0.0
    states = variables.states
    times = variables.timestamps
    for i in range(len(states) - 1):
        predicted = ctra_predict(states[i], times[i + 1] - times[i])
        residual = ctra_residual(predicted, states[i + 1])
        total += float(residual @ weight @ residual)
    return total


def _sensor_terms(state: TrackState, dims: BoxDims, cloud: AssociatedCloud):
    """(inlier, fitness) of the candidate box against its compensated cloud."""
    points = cloud.points
    if len(points) == 0:
        return 0.0, 0.0
    xy = compensate_xy(points[:, 0:2], points[:, 3], state)
    u, v = box_frame_coords(xy, state.pose, dims)
    inside = (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (v <= 1.0)
    inlier = 1.0 - np.count_nonzero(inside) / len(points)
    margin = np.minimum(np.minimum(u, 1.0 - u), np.minimum(v, 1.0 - v))
    fitness = float(np.mean((2.0 * margin) ** 2))
    return inlier, fitness


def inlier_cost(state: TrackState, z: float, dims: BoxDims, cloud: AssociatedCloud) -> float:
    """One minus the compensated inlier fraction, in [0, 1]; 0 for empty clouds.

    Membership is the 2D footprint test with the original dims; ``z`` is
    carried for interface completeness (height filtering already happened
    at association time).
    """
    del z
    return _sensor_terms(state, dims, cloud)[0]


def fitness_cost(state: TrackState, dims: BoxDims, cloud: AssociatedCloud) -> float:
    """Mean squared distance-to-nearest-face term; 0 for empty clouds."""
    return _sensor_terms(state, dims, cloud)[1]


def ego_cost(state: TrackState, ego: Pose2, config: ObjectiveConfig) -> float:
    """Reward (negative cost) for distance from the ego vehicle."""
    return -config.ego_weight * math.hypot(state.pose.x - ego.x, state.pose.y - ego.y)


def total_cost(
    variables: TrackVariables,
    clouds: list[AssociatedCloud],
    ego_poses: list[Pose2],
    zs: list[float],
    dims: list[BoxDims],
    config: ObjectiveConfig,
) -> float:
    """Full track objective; the motion term runs over edges, the rest over
    every sample including the first."""
    n = len(variables.states)
    for name, seq in (("clouds", clouds), ("ego_poses", ego_poses), ("zs", zs), ("dims", dims)):
        if len(seq) != n:
            raise LengthMismatch(f"{name} has length {len(seq)}, expected {n}")
    total = motion_cost(variables, config)
    for state, cloud, ego, box_dims in zip(variables.states, clouds, ego_poses, dims):
        inlier, fitness = _sensor_terms(state, box_dims, cloud)
        total += config.sensor_weight * (inlier + fitness) + ego_cost(state, ego, config)
    return total
