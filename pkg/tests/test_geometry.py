import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boxalign.geometry import (
    BoxDims,
    Pose2,
    angle_diff,
    footprint_contains,
    footprint_mask,
    from_box_frame,
    to_box_frame,
    volume_contains,
    wrap_angle,
)

angles = st.floats(-50.0, 50.0)
coords = st.floats(-1e4, 1e4)


def halfplane_oracle(point_xy, pose, dims):
    """Independent containment test: four signed half-plane distances."""
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    dx, dy = point_xy[0] - pose.x, point_xy[1] - pose.y
    along = dx * c + dy * s
    across = dy * c - dx * s
    return abs(along) <= dims.length / 2 and abs(across) <= dims.width / 2


class TestWrapAngle:
    @given(angles)
    def test_range(self, theta):
        wrapped = wrap_angle(theta)
        assert -math.pi < wrapped <= math.pi

    def test_boundaries(self):
        assert wrap_angle(math.pi) == math.pi
        assert wrap_angle(-math.pi) == math.pi
        assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)

    @given(angles)
    def test_idempotent(self, theta):
        assert wrap_angle(wrap_angle(theta)) == wrap_angle(theta)

    def test_pose_wraps_on_construction(self):
        assert Pose2(0.0, 0.0, 4.0).theta == pytest.approx(4.0 - math.tau)

    def test_angle_diff_wraps_through_pi(self):
        assert angle_diff(-3.1, 3.1) == pytest.approx(2 * (math.pi - 3.1))


class TestBoxDims:
    @pytest.mark.parametrize("bad", [(0, 1, 1), (1, -2, 1), (1, 1, float("nan"))])
    def test_rejects_nonpositive(self, bad):
        with pytest.raises(ValueError):
            BoxDims(*bad)


class TestToBoxFrame:
    def test_center_is_half_half(self):
        pose = Pose2(3.0, -7.0, 1.1)
        coords = to_box_frame((3.0, -7.0), pose, BoxDims(4.0, 2.0, 1.5))
        assert (coords.u, coords.v) == (0.5, 0.5)

    def test_front_face_midline(self):
        coords = to_box_frame((2.0, 0.0), Pose2(0, 0, 0), BoxDims(4.0, 2.0, 1.5))
        assert (coords.u, coords.v) == (1.0, 0.5)

    def test_rotated_box_spec_case(self):
        # verified by hand with an explicit 2D rotation matrix
        coords = to_box_frame((2.0, 1.0), Pose2(1.0, 1.0, math.pi / 2), BoxDims(4.0, 2.0, 1.5))
        assert coords.u == pytest.approx(0.5, abs=1e-12)
        assert coords.v == pytest.approx(0.0, abs=1e-12)

    @given(
        x=coords, y=coords, theta=angles,
        u=st.floats(-0.5, 1.5), v=st.floats(-0.5, 1.5),
        length=st.floats(0.5, 20.0), width=st.floats(0.5, 5.0),
    )
    def test_placement_roundtrip(self, x, y, theta, u, v, length, width):
        pose = Pose2(x, y, theta)
        dims = BoxDims(length, width, 1.5)
        point = from_box_frame(u, v, pose, dims)
        back = to_box_frame(point, pose, dims)
        # 1e-9 in meters along each axis
        assert back.u * length == pytest.approx(u * length, abs=1e-9)
        assert back.v * width == pytest.approx(v * width, abs=1e-9)


class TestFootprintContains:
    def test_centroid_inside(self):
        assert footprint_contains((1.0, 1.0), Pose2(1, 1, 0.3), BoxDims(4, 2, 1.5))

    def test_just_past_front_face_outside(self):
        assert not footprint_contains((2.01, 0.0), Pose2(0, 0, 0), BoxDims(4, 2, 1.5))

    def test_matches_halfplane_oracle(self, rng):
        pose = Pose2(2.0, -1.0, 0.83)
        dims = BoxDims(4.4, 1.9, 1.5)
        points = rng.uniform(-6, 6, size=(10_000, 2)) + (pose.x, pose.y)
        mask = footprint_mask(points, pose, dims)
        for point, inside in zip(points, mask):
            assert halfplane_oracle(point, pose, dims) == inside
            assert footprint_contains(point, pose, dims) == inside

    @given(
        shift_x=st.floats(-100, 100), shift_y=st.floats(-100, 100), rot=angles,
        px=st.floats(-10, 10), py=st.floats(-10, 10),
    )
    def test_rigid_transform_invariance(self, shift_x, shift_y, rot, px, py):
        pose = Pose2(1.0, -2.0, 0.4)
        dims = BoxDims(4.0, 2.0, 1.5)
        # Map both point and pose through the same rigid transform.  Stay
        # away from the box boundary so rounding cannot flip the result.
        coords = to_box_frame((px, py), pose, dims)
        if min(abs(coords.u), abs(coords.u - 1), abs(coords.v), abs(coords.v - 1)) < 1e-6:
            return
        c, s = math.cos(rot), math.sin(rot)
        moved_point = (px * c - py * s + shift_x, px * s + py * c + shift_y)
        moved_pose = Pose2(
            pose.x * c - pose.y * s + shift_x,
            pose.x * s + pose.y * c + shift_y,
            pose.theta + rot,
        )
        assert footprint_contains((px, py), pose, dims) == footprint_contains(
            moved_point, moved_pose, dims
        )


class TestVolumeContains:
    dims = BoxDims(4.0, 2.0, 1.5)

    def test_centroid(self):
        assert volume_contains((0, 0, 5.0), Pose2(0, 0, 0), 5.0, self.dims)

    def test_bottom_deflation_excludes_low_points(self):
        # box bottom at z=4.25; a point 0.1 m above it falls in the excluded band
        assert not volume_contains(
            (0, 0, 4.35), Pose2(0, 0, 0), 5.0, self.dims, z_bottom_offset=0.2
        )
        assert volume_contains(
            (0, 0, 4.35), Pose2(0, 0, 0), 5.0, self.dims, z_bottom_offset=0.0
        )

    def test_top_face_inclusive(self):
        assert volume_contains((0, 0, 5.75), Pose2(0, 0, 0), 5.0, self.dims)
        assert not volume_contains((0, 0, 5.7500001), Pose2(0, 0, 0), 5.0, self.dims)


class TestBoundaryTies:
    def test_face_points_count_as_inside(self):
        dims = BoxDims(4.0, 2.0, 1.5)
        pose = Pose2(0.25, -0.5, 0.0)  # dyadic center: face coords are exact
        for u, v in [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0), (0.0, 0.0), (1.0, 1.0)]:
            point = from_box_frame(u, v, pose, dims)
            assert footprint_contains(point, pose, dims)

    def test_strict_trichotomy_against_oracle(self, rng):
        pose = Pose2(1.5, 0.5, 0.0)
        dims = BoxDims(4.0, 2.0, 1.5)
        points = rng.uniform(-4, 4, size=(2000, 2)) + (pose.x, pose.y)
        for point in points:
            c = to_box_frame(point, pose, dims)
            margin = min(c.u, 1 - c.u, c.v, 1 - c.v)
            if abs(margin) < 1e-9:
                assert footprint_contains(point, pose, dims)  # ties resolve inside
            else:
                assert footprint_contains(point, pose, dims) == (margin > 0)
