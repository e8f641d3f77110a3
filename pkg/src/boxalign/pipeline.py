"""Whole-scene correction: association, initialization, per-track optimization.

Tracks are corrected independently (the objective couples the samples of
one track only), so they can run on a worker pool; scene data is shared
read-only and results are merged by track id, which makes the output
independent of worker count and completion order.  Tracks that cannot be
optimized (fewer than two boxes, degenerate timestamps) pass through
unmodified and are flagged in the diagnostics; a correction run never
emits fewer annotations than it received.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

from .association import AssociatedCloud, InflationParams, associate
from .geometry import BoxAnnotation
from .objective import ObjectiveConfig, TrackVariables, total_cost
from .optimizer import (
    SearchBounds,
    SearchConfig,
    TrackTooShort,
    initial_guess,
    naive_speeds,
    optimize_track,
)
from .sceneio import Scene

BoxKey = tuple[str, int]


@dataclass(frozen=True)
class Dynamics:
    """Estimated per-box dynamics along the box x-axis."""

    speed: float
    yaw_rate: float
    accel: float


@dataclass(frozen=True)
class TrackDiagnostics:
    track_id: str
    skipped: str | None
    initial_cost: float | None
    final_cost: float | None
    evaluations: int


@dataclass(eq=True)
class CorrectionResult:
    """Corrected annotations plus per-box dynamics and per-track audit data.

    The corrected list matches the input annotations one-to-one: same ids,
    sample indices, timestamps, z, and dims; only poses are replaced.
    """

    corrected: list[BoxAnnotation]
    estimated_dynamics: dict[BoxKey, Dynamics]
    diagnostics: list[TrackDiagnostics]


def group_tracks(annotations: list[BoxAnnotation]) -> dict[str, list[BoxAnnotation]]:
    """Annotations per track id (first-appearance order), sorted by sample."""
    tracks: dict[str, list[BoxAnnotation]] = {}
    for ann in annotations:
        tracks.setdefault(ann.track_id, []).append(ann)
    return {tid: sorted(anns, key=lambda a: a.sample_index) for tid, anns in tracks.items()}


@dataclass
class _TrackOutcome:
    states: TrackVariables | None
    naive: list[float]
    diagnostics: TrackDiagnostics


def _correct_track(
    track_id: str,
    annotations: list[BoxAnnotation],
    clouds: list[AssociatedCloud],
    ego_poses,
    naive: list[float],
    objective_config: ObjectiveConfig,
    search_config: SearchConfig,
    bounds: SearchBounds,
) -> _TrackOutcome:
    try:
        start = initial_guess(annotations)
    except TrackTooShort:
        diag = TrackDiagnostics(track_id, "too_short", None, None, 0)
        return _TrackOutcome(None, naive, diag)
    except ValueError:
        diag = TrackDiagnostics(track_id, "degenerate_timestamps", None, None, 0)
        return _TrackOutcome(None, naive, diag)

    zs = [a.z for a in annotations]
    dims = [a.dims for a in annotations]

    def objective(variables: TrackVariables) -> float:
        return total_cost(variables, clouds, ego_poses, zs, dims, objective_config)

    best, result = optimize_track(objective, start, bounds, search_config)
    diag = TrackDiagnostics(
        track_id=track_id,
        skipped=None,
        initial_cost=result.start_cost,
        final_cost=result.best_cost,
        evaluations=result.evaluations,
    )
    return _TrackOutcome(best, naive, diag)


def correct_scene(
    scene: Scene,
    objective_config: ObjectiveConfig | None = None,
    search_config: SearchConfig = SearchConfig(),
    inflation: InflationParams | None = None,
    bounds: SearchBounds = SearchBounds(),
    workers: int = 1,
    progress: Callable[[TrackDiagnostics], None] | None = None,
) -> CorrectionResult:
    """Correct every track of a scene; deterministic for fixed configs."""
    if objective_config is None:
        objective_config = ObjectiveConfig(
            annotation_frequency=scene.metadata.annotation_frequency
        )
    if inflation is None:
        inflation = InflationParams(sensor_period=scene.metadata.sensor_period)

    tracks = group_tracks(scene.annotations)

    # Naive speeds drive the one-time association; tracks whose timestamps
    # cannot support a finite difference associate with zero inflation speed.
    naive_by_track: dict[str, list[float]] = {}
    degenerate: set[str] = set()
    for track_id, annotations in tracks.items():
        try:
            naive_by_track[track_id] = naive_speeds(annotations)
        except ValueError:
            naive_by_track[track_id] = [0.0] * len(annotations)
            degenerate.add(track_id)
    speed_map = {
        (ann.track_id, ann.sample_index): speed
        for track_id, annotations in tracks.items()
        for ann, speed in zip(annotations, naive_by_track[track_id])
    }
    cloud_map = {
        (cloud.track_id, cloud.sample_index): cloud
        for cloud in associate(scene, speed_map, inflation)
    }

    def run(item) -> tuple[str, _TrackOutcome]:
        track_id, annotations = item
        naive = naive_by_track[track_id]
        if track_id in degenerate:
            diag = TrackDiagnostics(track_id, "degenerate_timestamps", None, None, 0)
            return track_id, _TrackOutcome(None, naive, diag)
        outcome = _correct_track(
            track_id,
            annotations,
            [cloud_map[(a.track_id, a.sample_index)] for a in annotations],
            [scene.ego[a.sample_index] for a in annotations],
            naive,
            objective_config,
            search_config,
            bounds,
        )
        return track_id, outcome

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = dict(pool.map(run, tracks.items()))
    else:
        outcomes = dict(map(run, tracks.items()))

    corrected_map: dict[BoxKey, BoxAnnotation] = {}
    dynamics: dict[BoxKey, Dynamics] = {}
    diagnostics: list[TrackDiagnostics] = []
    for track_id, annotations in tracks.items():
        outcome = outcomes[track_id]
        diagnostics.append(outcome.diagnostics)
        if progress is not None:
            progress(outcome.diagnostics)
        if outcome.states is None:
            # Pass-through: poses untouched, dynamics fall back to the
            # naive estimates so every output record stays complete.
            for ann, speed in zip(annotations, outcome.naive):
                key = (ann.track_id, ann.sample_index)
                corrected_map[key] = ann
                dynamics[key] = Dynamics(speed, 0.0, 0.0)
        else:
            for ann, state in zip(annotations, outcome.states.states):
                key = (ann.track_id, ann.sample_index)
                corrected_map[key] = replace(ann, pose=state.pose)
                dynamics[key] = Dynamics(state.speed, state.yaw_rate, state.accel)

    corrected = [corrected_map[(a.track_id, a.sample_index)] for a in scene.annotations]
    for ann in corrected:
        values = (ann.pose.x, ann.pose.y, ann.pose.theta)
        dyn = dynamics[(ann.track_id, ann.sample_index)]
        if not all(map(math.isfinite, values + (dyn.speed, dyn.yaw_rate, dyn.accel))):
            raise RuntimeError(
                f"non-finite output for box ({ann.track_id!r}, {ann.sample_index})"
            )
    return CorrectionResult(
        corrected=corrected, estimated_dynamics=dynamics, diagnostics=diagnostics
    )
