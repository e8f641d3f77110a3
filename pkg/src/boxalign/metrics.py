"""Annotation-quality metrics and controlled error injection.

* ``compute_ipd`` -- inlier points difference: the relative change in the
  total number of motion-compensated detections captured by the corrected
  footprints versus the original ones (positive means better placement).
* ``compute_error_records`` -- per-box position deltas between original and
  corrected boxes, decomposed in the corrected box's heading frame
  (``dede_x`` longitudinal, ``dede_y`` lateral, ``ede`` their norm).
* ``compute_sdede`` -- the error spread, three population standard
  deviations of each decomposed component over sufficiently fast boxes.
* ``group_errors`` -- percentile tables of the position error against speed
  and distance-to-ego intervals.
* ``perturb_annotations`` -- inject zero-mean Gaussian position noise in
  each moving box's heading frame, reproducing a measured error spread.

Speed filters use |speed| so reversing vehicles count as moving.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .association import InflationParams, associate
from .geometry import BoxAnnotation, Pose2, footprint_mask
from .motion import TrackState, compensate_xy
from .optimizer import naive_speeds
from .pipeline import CorrectionResult, group_tracks
from .sceneio import Scene

DEFAULT_MIN_SPEED = 3.0  # m/s; slower boxes are excluded from the statistics


class BoxSetMismatch(ValueError):
    pass


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class ErrorRecord:
    """Original-minus-corrected position error of one box."""

    track_id: str
    sample_index: int
    ede: float
    dede_x: float
    dede_y: float
    speed: float
    dist_to_ego: float


@dataclass(frozen=True)
class Histogram:
    edges: tuple[float, ...]
    counts: tuple[int, ...]


@dataclass(frozen=True)
class PercentileBin:
    """5/25/50/75/95 percentiles of the errors falling in one interval."""

    lower: float
    upper: float
    count: int
    percentiles: tuple[float, float, float, float, float] | None


@dataclass(frozen=True)
class MetricsReport:
    ipd: float | None
    sdede_x: float | None
    sdede_y: float | None
    min_speed: float
    record_count: int
    filtered_count: int
    ede_histogram: Histogram
    dede_x_histogram: Histogram
    dede_y_histogram: Histogram
    speed_bins: tuple[PercentileBin, ...]
    distance_bins: tuple[PercentileBin, ...]


def _corrected_state(ann: BoxAnnotation, result: CorrectionResult) -> TrackState:
    dyn = result.estimated_dynamics[(ann.track_id, ann.sample_index)]
    return TrackState(pose=ann.pose, speed=dyn.speed, yaw_rate=dyn.yaw_rate, accel=dyn.accel)


def compute_ipd(
    scene: Scene,
    original: list[BoxAnnotation],
    corrected: CorrectionResult,
    inflation: InflationParams,
    min_speed: float = DEFAULT_MIN_SPEED,
) -> float | None:
    """Inlier points difference over all boxes at least ``min_speed`` fast.

    Points are associated once against the original annotations (naive
    speeds), compensated with the corrected dynamics, and counted inside
    the corrected and the original footprints; the same compensated points
    feed both counts.  Returns None when the original boxes capture no
    points at all (the ratio is undefined).
    """
    corrected_by_key = {(a.track_id, a.sample_index): a for a in corrected.corrected}
    original_keys = {(a.track_id, a.sample_index) for a in original}
    if original_keys != set(corrected_by_key):
        raise BoxSetMismatch("original and corrected annotations cover different boxes")

    speed_map = {
        (ann.track_id, ann.sample_index): speed
        for track_id, annotations in group_tracks(original).items()
        for ann, speed in zip(annotations, naive_speeds(annotations))
    }
    clouds = associate(scene, speed_map, inflation)
    cloud_map = {(c.track_id, c.sample_index): c for c in clouds}

    in_corrected = 0
    in_original = 0
    for ann in original:
        key = (ann.track_id, ann.sample_index)
        corr = corrected_by_key[key]
        state = _corrected_state(corr, corrected)
        if abs(state.speed) < min_speed:
            continue
        points = cloud_map[key].points
        if len(points) == 0:
            continue
        xy = compensate_xy(points[:, 0:2], points[:, 3], state)
        in_corrected += int(np.count_nonzero(footprint_mask(xy, corr.pose, corr.dims)))
        in_original += int(np.count_nonzero(footprint_mask(xy, ann.pose, ann.dims)))
    if in_original == 0:
        return None
    return (in_corrected - in_original) / in_original


def compute_error_records(
    original: list[BoxAnnotation],
    corrected: CorrectionResult,
    ego_poses: list[Pose2],
) -> list[ErrorRecord]:
    """One record per box: the 2D delta original - corrected, decomposed in
    the corrected box's heading frame."""
    corrected_by_key = {(a.track_id, a.sample_index): a for a in corrected.corrected}
    if {(a.track_id, a.sample_index) for a in original} != set(corrected_by_key):
        raise BoxSetMismatch("original and corrected annotations cover different boxes")
    records = []
    for ann in original:
        key = (ann.track_id, ann.sample_index)
        corr = corrected_by_key[key]
        dyn = corrected.estimated_dynamics[key]
        delta_x = ann.pose.x - corr.pose.x
        delta_y = ann.pose.y - corr.pose.y
        heading_c = math.cos(corr.pose.theta)
        heading_s = math.sin(corr.pose.theta)
        dede_x = delta_x * heading_c + delta_y * heading_s
        dede_y = delta_y * heading_c - delta_x * heading_s
        ego = ego_poses[ann.sample_index]
        records.append(ErrorRecord(
            track_id=ann.track_id,
            sample_index=ann.sample_index,
            ede=math.hypot(delta_x, delta_y),
            dede_x=dede_x,
            dede_y=dede_y,
            speed=dyn.speed,
            dist_to_ego=math.hypot(corr.pose.x - ego.x, corr.pose.y - ego.y),
        ))
    return records


def compute_sdede(
    records: list[ErrorRecord], min_speed: float = DEFAULT_MIN_SPEED
) -> tuple[float, float]:
    """Three population standard deviations of (dede_x, dede_y) over boxes
    at least ``min_speed`` fast; needs at least two such records."""
    kept = [r for r in records if abs(r.speed) >= min_speed]
    if len(kept) < 2:
        raise InsufficientData(
            f"need at least 2 records with |speed| >= {min_speed}, got {len(kept)}"
        )
    xs = np.array([r.dede_x for r in kept])
    ys = np.array([r.dede_y for r in kept])
    return 3.0 * float(np.std(xs)), 3.0 * float(np.std(ys))


def _percentiles(values: np.ndarray) -> tuple[float, float, float, float, float]:
    p = np.percentile(values, [5, 25, 50, 75, 95])
    return tuple(float(v) for v in p)


def _bin_errors(records, keys: np.ndarray, edges) -> tuple[PercentileBin, ...]:
    edges = list(edges)
    for a, b in zip(edges, edges[1:]):
        if not b > a:
            raise ValueError("bin edges must be strictly increasing")
    edes = np.array([r.ede for r in records])
    bins = []
    for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
        last = i == len(edges) - 2
        mask = (keys >= lo) & ((keys <= hi) if last else (keys < hi))
        selected = edes[mask]
        bins.append(PercentileBin(
            lower=float(lo),
            upper=float(hi),
            count=int(mask.sum()),
            percentiles=_percentiles(selected) if len(selected) else None,
        ))
    return tuple(bins)


def group_errors(records: list[ErrorRecord], speed_edges, distance_edges):
    """(speed_bins, distance_bins) percentile tables of the position error.

    Intervals are half-open [lo, hi) except the last, which is closed.
    """
    speeds = np.array([abs(r.speed) for r in records])
    distances = np.array([r.dist_to_ego for r in records])
    return _bin_errors(records, speeds, speed_edges), _bin_errors(records, distances, distance_edges)


def _box_rng(seed: int, track_id: str, sample_index: int) -> np.random.Generator:
    # Counter-based stream keyed by box identity: output does not depend on
    # iteration order, so parallel perturbation stays deterministic.
    digest = hashlib.blake2s(track_id.encode("utf-8"), digest_size=8).digest()
    key = int.from_bytes(digest, "little")
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=[seed, key, sample_index]))
    )


def perturb_annotations(
    annotations: list[BoxAnnotation],
    sdede_x: float,
    sdede_y: float,
    seed: int,
    min_speed: float = DEFAULT_MIN_SPEED,
) -> list[BoxAnnotation]:
    """Shift each moving box by zero-mean Gaussian noise with sigma = spread/3
    per axis, applied in the box's own heading frame.

    A box counts as moving when its naive finite-difference speed is at
    least ``min_speed`` in magnitude; headings, z, dims, and timestamps are
    untouched.  Deterministic under a fixed seed, independent of order.
    """
    if sdede_x < 0 or sdede_y < 0:
        raise ValueError("spread values must be >= 0")
    speed_map = {}
    for track_id, track in group_tracks(annotations).items():
        for ann, speed in zip(track, naive_speeds(track)):
            speed_map[(ann.track_id, ann.sample_index)] = speed
    out = []
    for ann in annotations:
        if abs(speed_map[(ann.track_id, ann.sample_index)]) < min_speed:
            out.append(ann)
            continue
        rng = _box_rng(seed, ann.track_id, ann.sample_index)
        noise_x = rng.normal(0.0, sdede_x / 3.0)
        noise_y = rng.normal(0.0, sdede_y / 3.0)
        c = math.cos(ann.pose.theta)
        s = math.sin(ann.pose.theta)
        pose = Pose2(
            ann.pose.x + noise_x * c - noise_y * s,
            ann.pose.y + noise_x * s + noise_y * c,
            ann.pose.theta,
        )
        out.append(replace(ann, pose=pose))
    return out


def _histogram(values: np.ndarray, bins: int) -> Histogram:
    if len(values) == 0:
        return Histogram(edges=(0.0, 1.0), counts=(0,))
    counts, edges = np.histogram(values, bins=bins)
    return Histogram(edges=tuple(float(e) for e in edges), counts=tuple(int(c) for c in counts))


def default_speed_edges(min_speed: float = DEFAULT_MIN_SPEED) -> list[float]:
    return [min_speed] + [e for e in (5.0, 10.0, 15.0, 20.0, 25.0, 30.0) if e > min_speed] + [math.inf]


def default_distance_edges() -> list[float]:
    return [0.0, 10.0, 20.0, 40.0, 60.0, 80.0, 100.0, math.inf]


def build_report(
    records: list[ErrorRecord],
    ipd: float | None,
    min_speed: float = DEFAULT_MIN_SPEED,
    speed_edges=None,
    distance_edges=None,
    histogram_bins: int = 30,
) -> MetricsReport:
    """Aggregate error records into the reportable metric suite.

    All distribution statistics run on the speed-filtered records; the
    spread values are None when fewer than two records survive the filter.
    """
    if speed_edges is None:
        speed_edges = default_speed_edges(min_speed)
    if distance_edges is None:
        distance_edges = default_distance_edges()
    kept = [r for r in records if abs(r.speed) >= min_speed]
    try:
        sdede_x, sdede_y = compute_sdede(records, min_speed)
    except InsufficientData:
        sdede_x = sdede_y = None
    speed_bins, distance_bins = group_errors(kept, speed_edges, distance_edges)
    return MetricsReport(
        ipd=ipd,
        sdede_x=sdede_x,
        sdede_y=sdede_y,
        min_speed=min_speed,
        record_count=len(records),
        filtered_count=len(kept),
        ede_histogram=_histogram(np.array([r.ede for r in kept]), histogram_bins),
        dede_x_histogram=_histogram(np.array([r.dede_x for r in kept]), histogram_bins),
        dede_y_histogram=_histogram(np.array([r.dede_y for r in kept]), histogram_bins),
        speed_bins=speed_bins,
        distance_bins=distance_bins,
    )
