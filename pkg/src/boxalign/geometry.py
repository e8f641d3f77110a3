"""2D oriented-box geometry: poses, normalized box coordinates, containment.

Conventions used throughout the package:

* positions are metric, in a shared global frame; yaw angles are radians
  about +z and are stored wrapped to (-pi, pi]
* a box is described by its center pose, ``length`` along the heading axis,
  ``width`` across it, and ``height`` centered on the box z coordinate
* normalized footprint coordinates (u, v) are anchored at the rear-left
  corner: u runs 0 -> 1 from the rear face to the front face, v runs 0 -> 1
  between the two side faces, so a point is inside the footprint exactly
  when both coordinates lie in [0, 1]; boundary points count as inside
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


def angle_diff(a: float, b: float) -> float:
    """Shortest signed angular distance a - b, in (-pi, pi]."""
    return wrap_angle(a - b)


@dataclass(frozen=True)
class Pose2:
    """2D pose (x, y, yaw); yaw is wrapped to (-pi, pi] on construction."""

    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class BoxDims:
    """Box dimensions in meters; all strictly positive."""

    length: float
    width: float
    height: float

    def __post_init__(self) -> None:
        for name in ("length", "width", "height"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"box {name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class BoxAnnotation:
    """One annotated 3D box at a sample; z is the centroid height."""

    track_id: str
    sample_index: int
    timestamp: float
    pose: Pose2
    z: float
    dims: BoxDims

    def __post_init__(self) -> None:
        if self.sample_index < 0:
            raise ValueError(f"sample_index must be >= 0, got {self.sample_index}")


@dataclass(frozen=True)
class NormalizedBoxCoords:
    """Footprint coordinates; (u, v) both in [0, 1] exactly when inside."""

    u: float
    v: float

    @property
    def inside(self) -> bool:
        return 0.0 <= self.u <= 1.0 and 0.0 <= self.v <= 1.0


def to_box_frame(point_xy, pose: Pose2, dims: BoxDims) -> NormalizedBoxCoords:
    """Project a global 2D point to normalized box coordinates."""
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    dx = point_xy[0] - pose.x
    dy = point_xy[1] - pose.y
    u = 0.5 + (dx * c + dy * s) / dims.length
    v = 0.5 + (dy * c - dx * s) / dims.width
    return NormalizedBoxCoords(u, v)


def from_box_frame(u: float, v: float, pose: Pose2, dims: BoxDims) -> tuple[float, float]:
    """Place normalized box coordinates back into the global frame."""
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    au = (u - 0.5) * dims.length
    av = (v - 0.5) * dims.width
    return pose.x + au * c - av * s, pose.y + au * s + av * c


def footprint_contains(point_xy, pose: Pose2, dims: BoxDims) -> bool:
    """True when the point lies inside the box footprint (faces inclusive)."""
    return to_box_frame(point_xy, pose, dims).inside


def volume_contains(
    point,
    pose: Pose2,
    z: float,
    dims: BoxDims,
    z_bottom_offset: float = 0.0,
) -> bool:
    """Footprint test plus a height interval with an optionally raised bottom.

    The accepted band is [z - H/2 + z_bottom_offset, z + H/2]; a positive
    offset excludes the lowest part of the box (ground returns).
    """
    z_lo = z - 0.5 * dims.height + z_bottom_offset
    z_hi = z + 0.5 * dims.height
    if not (z_lo <= point[2] <= z_hi):
        return False
    return footprint_contains(point, pose, dims)


def box_frame_coords(points_xy: np.ndarray, pose: Pose2, dims: BoxDims):
    """Vectorized ``to_box_frame``: (N, 2) points -> (u, v) arrays."""
    c = math.cos(pose.theta)
    s = math.sin(pose.theta)
    dx = points_xy[:, 0] - pose.x
    dy = points_xy[:, 1] - pose.y
    u = 0.5 + (dx * c + dy * s) / dims.length
    v = 0.5 + (dy * c - dx * s) / dims.width
    return u, v


def footprint_mask(points_xy: np.ndarray, pose: Pose2, dims: BoxDims) -> np.ndarray:
    """Vectorized footprint containment for (N, 2) points."""
    u, v = box_frame_coords(points_xy, pose, dims)
    return (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (v <= 1.0)
