"""Bounded derivative-free pattern search over the joint track variable.

Classic Hooke-Jeeves: exploratory moves of +/- one step per dimension (the
positive direction is tried first and the first improvement is accepted),
followed by pattern moves that extrapolate along the improvement
direction; when a full exploratory sweep fails to improve, every step is
shrunk by a fixed factor.  Steps are maintained per dimension as fractions
of that dimension's bound range so heterogeneous units (meters, radians,
speeds) search at comparable resolution.  The algorithm is deterministic:
fixed inputs produce bit-identical output.

For track optimization the 6N-dimensional vector is ordered
(x, y, theta, speed, yaw_rate, accel) per node, nodes in time order.
Bounds are symmetric offsets from the initial guess; heading bounds apply
to the offset, while evaluated states carry the wrapped angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import BoxAnnotation, Pose2
from .motion import TrackState
from .objective import TrackVariables


class TrackTooShort(ValueError):
    def __init__(self, track_id: str, count: int):
        super().__init__(f"track {track_id!r} has {count} box(es); need at least 2")
        self.track_id = track_id
        self.count = count


@dataclass(frozen=True)
class SearchBounds:
    """Symmetric search offsets from the initial guess, per state dimension."""

    dx: float = 5.0
    dy: float = 5.0
    dtheta: float = math.pi / 16
    dspeed: float = 40.0
    dyaw_rate: float = math.pi / 8
    daccel: float = 20.0

    def __post_init__(self) -> None:
        for name in ("dx", "dy", "dtheta", "dspeed", "dyaw_rate", "daccel"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    def offsets(self) -> np.ndarray:
        return np.array([
            self.dx, self.dy, self.dtheta, self.dspeed, self.dyaw_rate, self.daccel,
        ])


@dataclass(frozen=True)
class SearchConfig:
    """Pattern-search parameters; fractions are relative to the bound range."""

    initial_step_fraction: float = 0.1
    shrink_factor: float = 0.5
    step_tolerance: float = 1.0e-3
    max_evaluations: int | None = None  # None -> 200 * dimension

    def __post_init__(self) -> None:
        if not 0 < self.initial_step_fraction:
            raise ValueError("initial_step_fraction must be > 0")
        if not 0 < self.shrink_factor < 1:
            raise ValueError("shrink_factor must be in (0, 1)")
        if not 0 < self.step_tolerance:
            raise ValueError("step_tolerance must be > 0")
        if self.max_evaluations is not None and self.max_evaluations < 1:
            raise ValueError("max_evaluations must be >= 1")


@dataclass
class PatternSearchResult:
    best: np.ndarray
    best_cost: float
    start_cost: float
    evaluations: int


def naive_speeds(annotations: Sequence[BoxAnnotation]) -> list[float]:
    """Finite-difference speed per box: the position delta to the next box
    divided by the time delta, projected onto that box's heading (the last
    box uses the backward difference).  Single-box tracks get 0."""
    n = len(annotations)
    if n == 1:
        return [0.0]
    speeds = []
    for i, ann in enumerate(annotations):
        j = i if i < n - 1 else i - 1
        a, b = annotations[j], annotations[j + 1]
        dt = b.timestamp - a.timestamp
        if not dt > 0:
            raise ValueError(
                f"track {ann.track_id!r}: non-increasing timestamps "
                f"({a.timestamp!r} -> {b.timestamp!r})"
            )
        vx = (b.pose.x - a.pose.x) / dt
        vy = (b.pose.y - a.pose.y) / dt
        speeds.append(vx * math.cos(ann.pose.theta) + vy * math.sin(ann.pose.theta))
    return speeds


def initial_guess(annotations: Sequence[BoxAnnotation]) -> TrackVariables:
    """Start point for the optimizer: annotated poses, naive speeds, zero
    yaw rate and acceleration."""
    if len(annotations) < 2:
        track_id = annotations[0].track_id if annotations else "<empty>"
        raise TrackTooShort(track_id, len(annotations))
    speeds = naive_speeds(annotations)
    states = tuple(
        TrackState(pose=ann.pose, speed=speed, yaw_rate=0.0, accel=0.0)
        for ann, speed in zip(annotations, speeds)
    )
    return TrackVariables(states=states, timestamps=tuple(a.timestamp for a in annotations))


def track_to_vector(variables: TrackVariables) -> np.ndarray:
    out = np.empty(6 * len(variables.states))
    for i, state in enumerate(variables.states):
        out[6 * i:6 * i + 6] = (
            state.pose.x, state.pose.y, state.pose.theta,
            state.speed, state.yaw_rate, state.accel,
        )
    return out


def vector_to_track(vector: np.ndarray, timestamps: Sequence[float]) -> TrackVariables:
    states = tuple(
        TrackState(
            pose=Pose2(vector[k], vector[k + 1], vector[k + 2]),
            speed=vector[k + 3],
            yaw_rate=vector[k + 4],
            accel=vector[k + 5],
        )
        for k in range(0, len(vector), 6)
    )
    return TrackVariables(states=states, timestamps=tuple(timestamps))


def track_bounds(start: np.ndarray, bounds: SearchBounds):
    """(lower, upper) arrays for a 6N start vector."""
    offsets = np.tile(bounds.offsets(), len(start) // 6)
    return start - offsets, start + offsets


def pattern_search(
    objective: Callable[[np.ndarray], float],
    start,
    lower,
    upper,
    config: SearchConfig = SearchConfig(),
) -> PatternSearchResult:
    """Minimize ``objective`` within box bounds, starting from ``start``.

    Terminates when every step falls below its tolerance or the evaluation
    budget is reached (a sweep in flight may overrun the budget by at most
    2 * dimension evaluations).  Always returns the best point seen; the
    returned cost never exceeds the start cost.
    """
    start = np.array(start, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if start.shape != lower.shape or start.shape != upper.shape:
        raise ValueError("start, lower, and upper must have identical shapes")
    if not np.all(lower < upper):
        raise ValueError("lower bounds must be strictly below upper bounds")
    if np.any(start < lower) or np.any(start > upper):
        raise ValueError("start must lie within the bounds")

    n = start.size
    max_evaluations = config.max_evaluations if config.max_evaluations is not None else 200 * n
    ranges = upper - lower
    steps = config.initial_step_fraction * ranges
    tolerances = config.step_tolerance * ranges
    evaluations = 0

    def evaluate(point: np.ndarray) -> float:
        nonlocal evaluations
        evaluations += 1
        return float(objective(point))

    def explore(point: np.ndarray, cost: float):
        point = point.copy()
        for d in range(n):
            for sign in (1.0, -1.0):
                coord = min(max(point[d] + sign * steps[d], lower[d]), upper[d])
                if coord == point[d]:
                    continue
                trial = point.copy()
                trial[d] = coord
                trial_cost = evaluate(trial)
                if trial_cost < cost:
                    point, cost = trial, trial_cost
                    break
        return point, cost

    start_cost = evaluate(start)
    base, base_cost = start, start_cost
    while evaluations < max_evaluations and np.any(steps >= tolerances):
        trial, trial_cost = explore(base, base_cost)
        if trial_cost < base_cost:
            previous = base
            base, base_cost = trial, trial_cost
            while evaluations < max_evaluations:
                pattern = np.clip(base + (base - previous), lower, upper)
                if np.array_equal(pattern, base):
                    break
                pattern_cost = evaluate(pattern)
                candidate, candidate_cost = explore(pattern, pattern_cost)
                if candidate_cost < base_cost:
                    previous = base
                    base, base_cost = candidate, candidate_cost
                else:
                    break
        else:
            steps = steps * config.shrink_factor
    return PatternSearchResult(
        best=base.copy(), best_cost=base_cost, start_cost=start_cost, evaluations=evaluations
    )


def optimize_track(
    objective: Callable[[TrackVariables], float],
    initial: TrackVariables,
    bounds: SearchBounds = SearchBounds(),
    config: SearchConfig = SearchConfig(),
) -> tuple[TrackVariables, PatternSearchResult]:
    """Run the pattern search over a track's 6N vector encoding."""
    start = track_to_vector(initial)
    lower, upper = track_bounds(start, bounds)
    timestamps = initial.timestamps

    def vector_objective(vector: np.ndarray) -> float:
        return objective(vector_to_track(vector, timestamps))

    result = pattern_search(vector_objective, start, lower, upper, config)
    return vector_to_track(result.best, timestamps), result
