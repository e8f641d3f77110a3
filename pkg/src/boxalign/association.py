"""Point-to-box association with speed-dependent box inflation.

Each original annotation is grown so that all detections that can
plausibly belong to the object over one full sensor sweep fall inside it:
the footprint is extended front and rear by a fixed margin plus the
distance the object covers in one scan period, the sides by a fixed
lateral margin, and the lowest part of the height band is excluded to keep
ground returns out.  Association runs once against the original annotated
poses and is immutable afterwards; a point may belong to several
overlapping boxes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import BoxDims, box_frame_coords
from .sceneio import Scene


class MissingSpeedEstimate(KeyError):
    def __init__(self, track_id: str, sample_index: int):
        super().__init__((track_id, sample_index))
        self.track_id = track_id
        self.sample_index = sample_index

    def __str__(self) -> str:
        return f"no speed estimate for box ({self.track_id!r}, {self.sample_index})"


@dataclass(frozen=True)
class InflationParams:
    """Margins applied to the original boxes before association."""

    sensor_period: float
    base_margin: float = 1.0
    lateral_margin: float = 0.5
    bottom_deflate: float = 0.2

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sensor_period) and self.sensor_period > 0):
            raise ValueError("sensor_period must be finite and > 0")
        for name in ("base_margin", "lateral_margin", "bottom_deflate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0")


@dataclass(frozen=True)
class AssociatedCloud:
    """Raw (uncompensated) global-frame detections assigned to one box.

    ``points`` has shape (N, 4) with columns (x, y, z, dt), in input order.
    """

    track_id: str
    sample_index: int
    points: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


def inflated_dims(dims: BoxDims, speed: float, params: InflationParams) -> BoxDims:
    """Dims grown by the association margins; |speed| so reversing cannot shrink."""
    grow = params.base_margin + params.sensor_period * abs(speed)
    return BoxDims(
        length=dims.length + 2.0 * grow,
        width=dims.width + 2.0 * params.lateral_margin,
        height=dims.height,
    )


def associate(
    scene: Scene,
    speed_estimates: dict[tuple[str, int], float],
    params: InflationParams,
) -> list[AssociatedCloud]:
    """Assign every sample's detections to boxes via inflated-box membership.

    Returns one cloud per annotation, in the scene's annotation order;
    clouds may be empty.  Raises ``MissingSpeedEstimate`` when a box has no
    entry in ``speed_estimates``.
    """
    out = []
    for ann in scene.annotations:
        key = (ann.track_id, ann.sample_index)
        if key not in speed_estimates:
            raise MissingSpeedEstimate(*key)
        dims = inflated_dims(ann.dims, speed_estimates[key], params)
        cloud = scene.clouds[ann.sample_index]
        if len(cloud) == 0:
            points = cloud.reshape(0, 4)
        else:
            u, v = box_frame_coords(cloud[:, 0:2], ann.pose, dims)
            z_lo = ann.z - 0.5 * dims.height + params.bottom_deflate
            z_hi = ann.z + 0.5 * dims.height
            mask = (
                (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (v <= 1.0)
                & (cloud[:, 2] >= z_lo) & (cloud[:, 2] <= z_hi)
            )
            points = cloud[mask]
        out.append(AssociatedCloud(ann.track_id, ann.sample_index, points))
    return out
