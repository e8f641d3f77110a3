"""Bit-exact scene serialization.

A scene directory contains:

* ``scene.json``       -- annotation frequency, sensor period, sample timestamps
* ``annotations.jsonl`` -- one box record per line, fixed key order
* ``ego.jsonl``        -- one ego pose per sample, in sample order
* ``points/<i>.bin``   -- per-sample detections as consecutive little-endian
  float32 quadruples (x, y, z, dt), 16 bytes per point, no header

JSONL numerics are written as float64 decimal text (Python ``repr``, i.e.
shortest round-trip form); point payloads are float32 binary.  Identical
scenes always serialize to byte-identical directories, and the reader
rejects any directory violating a scene invariant instead of repairing it.

Corrected outputs reuse the annotation schema plus per-box dynamics
(``corrected.jsonl``) and per-track audit data (``diagnostics.jsonl``).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .geometry import BoxAnnotation, BoxDims, Pose2

if TYPE_CHECKING:
    from .pipeline import CorrectionResult

POINT_RECORD_BYTES = 16  # four little-endian float32 values: x, y, z, dt


class SceneFormatError(Exception):
    """Base class for scene directory validation failures."""


class MissingFile(SceneFormatError):
    pass


class MalformedRecord(SceneFormatError):
    pass


class InvariantViolation(SceneFormatError):
    pass


@dataclass(frozen=True)
class TimedPoint:
    """A global-frame 3D detection; dt is capture time minus reference time."""

    x: float
    y: float
    z: float
    dt: float


@dataclass(frozen=True)
class SceneMetadata:
    annotation_frequency: float
    sensor_period: float
    timestamps: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (math.isfinite(self.annotation_frequency) and self.annotation_frequency > 0):
            raise ValueError("annotation_frequency must be finite and > 0")
        if not (math.isfinite(self.sensor_period) and self.sensor_period > 0):
            raise ValueError("sensor_period must be finite and > 0")
        if len(self.timestamps) < 1:
            raise ValueError("scene needs at least one sample timestamp")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if not b > a:
                raise ValueError("sample timestamps must be strictly increasing")


@dataclass(eq=False)
class Scene:
    """Immutable-by-convention scene container.

    ``clouds[i]`` is a float64 array of shape (N_i, 4) with columns
    (x, y, z, dt); values are float32-exact since they round-trip through
    the binary point files.
    """

    metadata: SceneMetadata
    annotations: list[BoxAnnotation]
    ego: list[Pose2]
    clouds: list[np.ndarray]

    @property
    def num_samples(self) -> int:
        return len(self.metadata.timestamps)


def _check_scene(scene: Scene) -> None:
    n = scene.num_samples
    if len(scene.ego) != n:
        raise InvariantViolation(f"expected {n} ego poses, got {len(scene.ego)}")
    if len(scene.clouds) != n:
        raise InvariantViolation(f"expected {n} point clouds, got {len(scene.clouds)}")
    for ann in scene.annotations:
        if ann.sample_index >= n:
            raise InvariantViolation(
                f"annotation ({ann.track_id!r}, {ann.sample_index}) exceeds sample count {n}"
            )


def scenes_equal(a: Scene, b: Scene) -> bool:
    """Field-wise equality including point arrays."""
    return (
        a.metadata == b.metadata
        and a.annotations == b.annotations
        and a.ego == b.ego
        and len(a.clouds) == len(b.clouds)
        and all(np.array_equal(ca, cb) for ca, cb in zip(a.clouds, b.clouds))
    )


def _dump_line(record: dict) -> str:
    return json.dumps(record, allow_nan=False) + "\n"


def _annotation_record(ann: BoxAnnotation) -> dict:
    return {
        "track_id": ann.track_id,
        "sample_index": ann.sample_index,
        "timestamp": ann.timestamp,
        "x": ann.pose.x,
        "y": ann.pose.y,
        "theta": ann.pose.theta,
        "z": ann.z,
        "length": ann.dims.length,
        "width": ann.dims.width,
        "height": ann.dims.height,
    }


def write_scene(scene: Scene, path: str | os.PathLike) -> None:
    """Serialize a scene to ``path`` in canonical form."""
    _check_scene(scene)
    root = Path(path)
    (root / "points").mkdir(parents=True, exist_ok=True)

    meta = {
        "annotation_frequency": scene.metadata.annotation_frequency,
        "sensor_period": scene.metadata.sensor_period,
        "timestamps": list(scene.metadata.timestamps),
    }
    (root / "scene.json").write_text(json.dumps(meta, indent=2, allow_nan=False) + "\n")

    with open(root / "annotations.jsonl", "w") as fh:
        for ann in scene.annotations:
            fh.write(_dump_line(_annotation_record(ann)))

    with open(root / "ego.jsonl", "w") as fh:
        for i, pose in enumerate(scene.ego):
            fh.write(_dump_line({"sample_index": i, "x": pose.x, "y": pose.y, "theta": pose.theta}))

    for i, cloud in enumerate(scene.clouds):
        data = np.ascontiguousarray(cloud, dtype="<f4").tobytes() if len(cloud) else b""
        (root / "points" / f"{i}.bin").write_bytes(data)


def _read_jsonl(path: Path):
    if not path.is_file():
        raise MissingFile(f"{path}: missing file")
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            if not isinstance(record, dict):
                raise MalformedRecord(f"{path}:{lineno}: expected an object")
            yield lineno, record


def _require(record: dict, keys: tuple[str, ...], path: Path, lineno: int) -> None:
    if set(record) != set(keys):
        raise MalformedRecord(
            f"{path}:{lineno}: expected keys {list(keys)}, got {sorted(record)}"
        )


def _finite(record: dict, key: str, path: Path, lineno: int) -> float:
    value = record[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise MalformedRecord(f"{path}:{lineno}: field {key!r} must be a finite number")
    return float(value)


_ANNOTATION_KEYS = (
    "track_id", "sample_index", "timestamp",
    "x", "y", "theta", "z", "length", "width", "height",
)


def _parse_annotation(record: dict, path: Path, lineno: int) -> BoxAnnotation:
    _require(record, _ANNOTATION_KEYS, path, lineno)
    track_id = record["track_id"]
    if not isinstance(track_id, str):
        raise MalformedRecord(f"{path}:{lineno}: track_id must be a string")
    sample_index = record["sample_index"]
    if isinstance(sample_index, bool) or not isinstance(sample_index, int):
        raise MalformedRecord(f"{path}:{lineno}: sample_index must be an integer")
    values = {k: _finite(record, k, path, lineno) for k in _ANNOTATION_KEYS[2:]}
    try:
        return BoxAnnotation(
            track_id=track_id,
            sample_index=sample_index,
            timestamp=values["timestamp"],
            pose=Pose2(values["x"], values["y"], values["theta"]),
            z=values["z"],
            dims=BoxDims(values["length"], values["width"], values["height"]),
        )
    except ValueError as exc:
        raise InvariantViolation(f"{path}:{lineno}: {exc}") from exc


def read_scene(path: str | os.PathLike) -> Scene:
    """Read and fully validate a scene directory."""
    root = Path(path)
    meta_path = root / "scene.json"
    if not meta_path.is_file():
        raise MissingFile(f"{meta_path}: missing file")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"{meta_path}: invalid JSON ({exc})") from exc
    if not isinstance(meta, dict) or set(meta) != {
        "annotation_frequency", "sensor_period", "timestamps",
    }:
        raise MalformedRecord(f"{meta_path}: unexpected metadata layout")
    timestamps = meta["timestamps"]
    if not isinstance(timestamps, list) or not all(
        isinstance(t, (int, float)) and not isinstance(t, bool) and math.isfinite(t)
        for t in timestamps
    ):
        raise MalformedRecord(f"{meta_path}: timestamps must be finite numbers")
    try:
        metadata = SceneMetadata(
            annotation_frequency=float(meta["annotation_frequency"]),
            sensor_period=float(meta["sensor_period"]),
            timestamps=tuple(float(t) for t in timestamps),
        )
    except (TypeError, ValueError) as exc:
        raise InvariantViolation(f"{meta_path}: {exc}") from exc
    n = len(metadata.timestamps)

    ann_path = root / "annotations.jsonl"
    annotations: list[BoxAnnotation] = []
    seen: dict[tuple[str, int], int] = {}
    lines: dict[tuple[str, int], int] = {}
    for lineno, record in _read_jsonl(ann_path):
        ann = _parse_annotation(record, ann_path, lineno)
        key = (ann.track_id, ann.sample_index)
        if key in seen:
            raise InvariantViolation(
                f"{ann_path}:{lineno}: duplicate (track_id, sample_index) {key}, "
                f"first seen at line {seen[key]}"
            )
        if ann.sample_index >= n:
            raise InvariantViolation(
                f"{ann_path}:{lineno}: sample_index {ann.sample_index} out of range "
                f"for {n} samples"
            )
        seen[key] = lineno
        lines[key] = lineno
        annotations.append(ann)

    by_track: dict[str, list[BoxAnnotation]] = {}
    for ann in annotations:
        by_track.setdefault(ann.track_id, []).append(ann)
    for track_id, track in by_track.items():
        track = sorted(track, key=lambda a: a.sample_index)
        for a, b in zip(track, track[1:]):
            if not b.timestamp > a.timestamp:
                lineno = lines[(b.track_id, b.sample_index)]
                raise InvariantViolation(
                    f"{ann_path}:{lineno}: track {track_id!r} timestamps not strictly "
                    f"increasing with sample_index ({a.timestamp!r} -> {b.timestamp!r})"
                )

    ego_path = root / "ego.jsonl"
    ego: list[Pose2] = []
    for lineno, record in _read_jsonl(ego_path):
        _require(record, ("sample_index", "x", "y", "theta"), ego_path, lineno)
        index = record["sample_index"]
        if isinstance(index, bool) or not isinstance(index, int) or index != len(ego):
            raise InvariantViolation(
                f"{ego_path}:{lineno}: expected sample_index {len(ego)}, got {index!r}"
            )
        ego.append(Pose2(
            _finite(record, "x", ego_path, lineno),
            _finite(record, "y", ego_path, lineno),
            _finite(record, "theta", ego_path, lineno),
        ))
    if len(ego) != n:
        raise InvariantViolation(f"{ego_path}: expected {n} ego poses, got {len(ego)}")

    clouds: list[np.ndarray] = []
    for i in range(n):
        bin_path = root / "points" / f"{i}.bin"
        if not bin_path.is_file():
            raise MissingFile(f"{bin_path}: missing file")
        data = bin_path.read_bytes()
        if len(data) % POINT_RECORD_BYTES != 0:
            raise MalformedRecord(
                f"{bin_path}: size {len(data)} is not a multiple of "
                f"{POINT_RECORD_BYTES} bytes (truncated at byte offset "
                f"{len(data) - len(data) % POINT_RECORD_BYTES})"
            )
        cloud = np.frombuffer(data, dtype="<f4").reshape(-1, 4).astype(np.float64)
        if cloud.size and not np.all(np.isfinite(cloud)):
            raise InvariantViolation(f"{bin_path}: non-finite point values")
        clouds.append(cloud)

    scene = Scene(metadata=metadata, annotations=annotations, ego=ego, clouds=clouds)
    _check_scene(scene)
    return scene


def write_corrected(result: "CorrectionResult", path: str | os.PathLike) -> None:
    """Write ``corrected.jsonl`` and ``diagnostics.jsonl`` into ``path``."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)

    with open(root / "corrected.jsonl", "w") as fh:
        for ann in result.corrected:
            record = _annotation_record(ann)
            dyn = result.estimated_dynamics[(ann.track_id, ann.sample_index)]
            record["speed"] = dyn.speed
            record["yaw_rate"] = dyn.yaw_rate
            record["accel"] = dyn.accel
            fh.write(_dump_line(record))

    with open(root / "diagnostics.jsonl", "w") as fh:
        for diag in result.diagnostics:
            fh.write(_dump_line({
                "track_id": diag.track_id,
                "skipped": diag.skipped,
                "initial_cost": diag.initial_cost,
                "final_cost": diag.final_cost,
                "evaluations": diag.evaluations,
            }))


_CORRECTED_KEYS = _ANNOTATION_KEYS + ("speed", "yaw_rate", "accel")


def read_corrected(path: str | os.PathLike) -> "CorrectionResult":
    """Read a corrected-output directory back into a ``CorrectionResult``."""
    from .pipeline import CorrectionResult, Dynamics, TrackDiagnostics

    root = Path(path)
    corrected: list[BoxAnnotation] = []
    dynamics: dict[tuple[str, int], Dynamics] = {}
    corr_path = root / "corrected.jsonl"
    for lineno, record in _read_jsonl(corr_path):
        _require(record, _CORRECTED_KEYS, corr_path, lineno)
        dyn = Dynamics(
            speed=_finite(record, "speed", corr_path, lineno),
            yaw_rate=_finite(record, "yaw_rate", corr_path, lineno),
            accel=_finite(record, "accel", corr_path, lineno),
        )
        ann = _parse_annotation(
            {k: record[k] for k in _ANNOTATION_KEYS}, corr_path, lineno
        )
        key = (ann.track_id, ann.sample_index)
        if key in dynamics:
            raise InvariantViolation(f"{corr_path}:{lineno}: duplicate box {key}")
        corrected.append(ann)
        dynamics[key] = dyn

    diag_path = root / "diagnostics.jsonl"
    diagnostics: list[TrackDiagnostics] = []
    for lineno, record in _read_jsonl(diag_path):
        _require(
            record,
            ("track_id", "skipped", "initial_cost", "final_cost", "evaluations"),
            diag_path, lineno,
        )
        skipped = record["skipped"]
        if skipped is not None and not isinstance(skipped, str):
            raise MalformedRecord(f"{diag_path}:{lineno}: skipped must be null or a string")
        costs = {}
        for key in ("initial_cost", "final_cost"):
            value = record[key]
            costs[key] = None if value is None else _finite(record, key, diag_path, lineno)
        evaluations = record["evaluations"]
        if isinstance(evaluations, bool) or not isinstance(evaluations, int):
            raise MalformedRecord(f"{diag_path}:{lineno}: evaluations must be an integer")
        diagnostics.append(TrackDiagnostics(
            track_id=str(record["track_id"]),
            skipped=skipped,
            initial_cost=costs["initial_cost"],
            final_cost=costs["final_cost"],
            evaluations=evaluations,
        ))

    return CorrectionResult(
        corrected=corrected, estimated_dynamics=dynamics, diagnostics=diagnostics
    )


def write_truth(states, path: str | os.PathLike) -> None:
    """Write a ground-truth sidecar ``truth.jsonl``.

    ``states`` maps (track_id, sample_index) to the exact object state at the
    annotation reference time.
    """
    with open(path, "w") as fh:
        for (track_id, sample_index), state in states.items():
            fh.write(_dump_line({
                "track_id": track_id,
                "sample_index": sample_index,
                "x": state.pose.x,
                "y": state.pose.y,
                "theta": state.pose.theta,
                "speed": state.speed,
                "yaw_rate": state.yaw_rate,
                "accel": state.accel,
            }))


def read_truth(path: str | os.PathLike):
    """Read a ``truth.jsonl`` sidecar into a (track_id, sample_index) -> state map."""
    from .motion import TrackState

    truth_path = Path(path)
    states = {}
    keys = ("track_id", "sample_index", "x", "y", "theta", "speed", "yaw_rate", "accel")
    for lineno, record in _read_jsonl(truth_path):
        _require(record, keys, truth_path, lineno)
        index = record["sample_index"]
        if isinstance(index, bool) or not isinstance(index, int):
            raise MalformedRecord(f"{truth_path}:{lineno}: sample_index must be an integer")
        key = (str(record["track_id"]), index)
        if key in states:
            raise InvariantViolation(f"{truth_path}:{lineno}: duplicate box {key}")
        states[key] = TrackState(
            pose=Pose2(
                _finite(record, "x", truth_path, lineno),
                _finite(record, "y", truth_path, lineno),
                _finite(record, "theta", truth_path, lineno),
            ),
            speed=_finite(record, "speed", truth_path, lineno),
            yaw_rate=_finite(record, "yaw_rate", truth_path, lineno),
            accel=_finite(record, "accel", truth_path, lineno),
        )
    return states
