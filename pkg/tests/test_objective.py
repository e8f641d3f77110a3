import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from boxalign.association import AssociatedCloud
from boxalign.geometry import BoxDims, Pose2, from_box_frame
from boxalign.motion import TrackState, ctra_predict
from boxalign.objective import (
    LengthMismatch,
    ObjectiveConfig,
    TrackVariables,
    ego_cost,
    fitness_cost,
    inlier_cost,
    motion_cost,
    total_cost,
)

DIMS = BoxDims(4.0, 2.0, 1.5)


def state(x=0.0, y=0.0, theta=0.0, speed=0.0, yaw_rate=0.0, accel=0.0):
    return TrackState(pose=Pose2(x, y, theta), speed=speed, yaw_rate=yaw_rate, accel=accel)


def cloud_at(points_xy, dt=0.0, track_id="t", sample_index=0):
    points_xy = np.asarray(points_xy, dtype=np.float64)
    points = np.column_stack([
        points_xy,
        np.full(len(points_xy), 1.0),
        np.full(len(points_xy), dt),
    ])
    return AssociatedCloud(track_id, sample_index, points)


def rollout_track(initial, timestamps):
    states = [initial]
    for a, b in zip(timestamps, timestamps[1:]):
        states.append(ctra_predict(states[-1], b - a))
    return TrackVariables(states=tuple(states), timestamps=tuple(timestamps))


def config(frequency=10.0, **kwargs):
    return ObjectiveConfig(annotation_frequency=frequency, **kwargs)


class TestObjectiveConfig:
    def test_default_motion_weight(self):
        cfg = config(frequency=10.0)
        assert np.array_equal(cfg.motion_weight_matrix, 100.0 * np.eye(6))
        assert cfg.sensor_weight == 1.0e3
        assert cfg.ego_weight == 1.0e-4

    def test_rejects_asymmetric_matrix(self):
        bad = np.eye(6)
        bad[0, 1] = 0.5
        with pytest.raises(ValueError):
            config(motion_weight_matrix=bad)

    def test_rejects_indefinite_matrix(self):
        with pytest.raises(ValueError):
            config(motion_weight_matrix=-np.eye(6))


class TestMotionCost:
    def test_exact_rollout_costs_zero(self):
        timestamps = [0.0, 0.1, 0.2, 0.3]
        track = rollout_track(state(speed=12.0, yaw_rate=0.2, accel=1.0), timestamps)
        assert motion_cost(track, config()) == pytest.approx(0.0, abs=1e-18)

    def test_quadratic_form_single_offset(self):
        track = TrackVariables(
            states=(state(speed=0.0), state(x=1.0, speed=0.0)),
            timestamps=(0.0, 0.1),
        )
        cfg = config(motion_weight_matrix=100.0 * np.eye(6))
        assert motion_cost(track, cfg) == pytest.approx(100.0)

    def test_matches_per_edge_oracle(self, rng):
        # independent implementation: explicit per-edge quadratic forms
        timestamps = [0.0, 0.1, 0.25, 0.31, 0.5]
        states = tuple(
            state(*rng.uniform(-1, 1, 3), speed=rng.uniform(-5, 5),
                  yaw_rate=rng.uniform(-0.3, 0.3), accel=rng.uniform(-2, 2))
            for _ in range(5)
        )
        track = TrackVariables(states=states, timestamps=tuple(timestamps))
        weight = np.diag(rng.uniform(0.5, 3.0, 6))
        cfg = config(motion_weight_matrix=weight)

        expected = 0.0
        for i in range(4):
            predicted = ctra_predict(states[i], timestamps[i + 1] - timestamps[i])
            diff = np.array([
                states[i + 1].pose.x - predicted.pose.x,
                states[i + 1].pose.y - predicted.pose.y,
                math.remainder(states[i + 1].pose.theta - predicted.pose.theta, math.tau),
                states[i + 1].speed - predicted.speed,
                states[i + 1].yaw_rate - predicted.yaw_rate,
                states[i + 1].accel - predicted.accel,
            ])
            expected += diff @ weight @ diff
        assert motion_cost(track, cfg) == pytest.approx(expected, rel=1e-12)


class TestInlierCost:
    def test_all_inside(self):
        cloud = cloud_at([[0.0, 0.0], [1.0, 0.5], [-1.9, -0.9]])
        assert inlier_cost(state(), 1.0, DIMS, cloud) == 0.0

    def test_none_inside(self):
        cloud = cloud_at([[10.0, 0.0], [0.0, 5.0]])
        assert inlier_cost(state(), 1.0, DIMS, cloud) == 1.0

    def test_half_inside(self):
        inside = [[0.0, 0.1 * k] for k in range(-5, 5)]
        outside = [[7.0, 0.1 * k] for k in range(-5, 5)]
        cloud = cloud_at(inside + outside)
        assert inlier_cost(state(), 1.0, DIMS, cloud) == pytest.approx(0.5)

    def test_empty_cloud_zero(self):
        cloud = cloud_at(np.empty((0, 2)))
        assert inlier_cost(state(), 1.0, DIMS, cloud) == 0.0

    def test_compensation_uses_candidate_state(self):
        # a point 0.3 m ahead of the front face, captured 30 ms late while
        # moving at 10 m/s, compensates exactly onto the face
        cloud = cloud_at([[2.3, 0.0]], dt=0.03)
        assert inlier_cost(state(speed=10.0), 1.0, DIMS, cloud) == 0.0
        assert inlier_cost(state(speed=0.0), 1.0, DIMS, cloud) == 1.0


class TestFitnessCost:
    def test_points_on_faces_zero(self):
        pose = Pose2(0.25, -0.5, 0.0)  # dyadic center keeps face coords exact
        box = BoxDims(4.0, 2.0, 1.5)
        points = [from_box_frame(u, v, pose, box) for u, v in
                  [(0.0, 0.25), (1.0, 0.75), (0.5, 0.0), (0.25, 1.0)]]
        assert fitness_cost(state(x=0.25, y=-0.5), box, cloud_at(points)) == 0.0

    def test_centroid_is_one(self):
        cloud = cloud_at([[1.5, -2.25]])
        assert fitness_cost(state(x=1.5, y=-2.25, theta=0.7), DIMS, cloud) == 1.0

    def test_outside_point_quarter(self):
        # u = -0.25, v = 0.5 -> (2 * -0.25)^2 = 0.25
        cloud = cloud_at([[-3.0, 0.0]])
        assert fitness_cost(state(), DIMS, cloud) == pytest.approx(0.25)

    def test_empty_cloud_zero(self):
        assert fitness_cost(state(), DIMS, cloud_at(np.empty((0, 2)))) == 0.0

    def test_grows_quadratically_outside(self):
        far = fitness_cost(state(), DIMS, cloud_at([[2.0 + 8.0, 0.0]]))
        near = fitness_cost(state(), DIMS, cloud_at([[2.0 + 4.0, 0.0]]))
        assert far / near == pytest.approx(4.0, rel=1e-6)

    @given(offset=st.floats(-0.02, 0.02))
    def test_continuous_across_face(self, offset):
        cloud = cloud_at([[2.0 + offset, 0.0]])
        value = fitness_cost(state(), DIMS, cloud)
        assert value <= (2 * abs(offset) / DIMS.length) ** 2 + 1e-15


class TestEgoCost:
    def test_at_ego_zero(self):
        assert ego_cost(state(x=3.0, y=4.0), Pose2(3.0, 4.0, 0.0), config()) == 0.0

    def test_hundred_meters(self):
        value = ego_cost(state(x=100.0), Pose2(0, 0, 0), config())
        assert value == pytest.approx(-0.01)

    @given(shift_x=st.floats(-50, 50), shift_y=st.floats(-50, 50))
    def test_translation_invariance(self, shift_x, shift_y):
        base = ego_cost(state(x=10.0, y=5.0), Pose2(2.0, 1.0, 0.0), config())
        moved = ego_cost(
            state(x=10.0 + shift_x, y=5.0 + shift_y),
            Pose2(2.0 + shift_x, 1.0 + shift_y, 0.0),
            config(),
        )
        assert moved == pytest.approx(base, abs=1e-12)


def perfect_track_inputs(beta_d=0.0):
    """Straight track whose points sit exactly on faces of the true boxes."""
    timestamps = [0.0, 0.1, 0.2]
    track = rollout_track(state(x=0.25, speed=10.0), timestamps)
    clouds = []
    for i, s in enumerate(track.states):
        points = [from_box_frame(u, v, s.pose, DIMS) for u, v in
                  [(0.0, 0.25), (0.0, 0.75), (1.0, 0.5), (0.25, 0.0), (0.75, 0.0)]]
        clouds.append(cloud_at(points, dt=0.0, sample_index=i))
    egos = [Pose2(0.0, -10.0, 0.0)] * 3
    cfg = ObjectiveConfig(annotation_frequency=10.0, ego_weight=beta_d)
    return track, clouds, egos, [1.0] * 3, [DIMS] * 3, cfg


class TestTotalCost:
    def test_perfect_track_zero(self):
        track, clouds, egos, zs, dims, cfg = perfect_track_inputs(beta_d=0.0)
        assert total_cost(track, clouds, egos, zs, dims, cfg) == pytest.approx(0.0, abs=1e-18)

    def test_displaced_box_strictly_positive(self):
        track, clouds, egos, zs, dims, cfg = perfect_track_inputs(beta_d=0.0)
        shifted_states = list(track.states)
        s1 = shifted_states[1]
        shifted_states[1] = TrackState(
            pose=Pose2(s1.pose.x + 1.0, s1.pose.y, s1.pose.theta),
            speed=s1.speed, yaw_rate=s1.yaw_rate, accel=s1.accel,
        )
        shifted = TrackVariables(states=tuple(shifted_states), timestamps=track.timestamps)
        assert total_cost(shifted, clouds, egos, zs, dims, cfg) > 0.0

    def test_decomposes_into_terms(self):
        track, clouds, egos, zs, dims, cfg = perfect_track_inputs(beta_d=1e-4)
        total = total_cost(track, clouds, egos, zs, dims, cfg)
        parts = motion_cost(track, cfg)
        for s, cloud, ego, z, box in zip(track.states, clouds, egos, zs, dims):
            parts += cfg.sensor_weight * (
                inlier_cost(s, z, box, cloud) + fitness_cost(s, box, cloud)
            )
            parts += ego_cost(s, ego, cfg)
        assert total == pytest.approx(parts, abs=1e-12)

    def test_length_mismatch(self):
        track, clouds, egos, zs, dims, cfg = perfect_track_inputs()
        with pytest.raises(LengthMismatch):
            total_cost(track, clouds[:-1], egos, zs, dims, cfg)

    def test_rigid_transform_invariance(self):
        # The inlier term is a step function, so membership of points lying
        # exactly on a face can flip under rounding; keep the cloud off the
        # boundary and the whole objective transforms rigidly.
        track, _, egos, zs, dims, cfg = perfect_track_inputs(beta_d=1e-4)
        clouds = []
        for i, s in enumerate(track.states):
            points = [from_box_frame(u, v, s.pose, DIMS) for u, v in
                      [(0.1, 0.3), (0.9, 0.7), (0.5, 0.2), (1.3, 0.5), (-0.2, 1.4)]]
            clouds.append(cloud_at(points, dt=0.02, sample_index=i))
        base = total_cost(track, clouds, egos, zs, dims, cfg)
        rot, tx, ty = 0.83, 15.0, -7.0
        c, s = math.cos(rot), math.sin(rot)

        def move_xy(x, y):
            return x * c - y * s + tx, x * s + y * c + ty

        moved_states = tuple(
            TrackState(
                pose=Pose2(*move_xy(st.pose.x, st.pose.y), st.pose.theta + rot),
                speed=st.speed, yaw_rate=st.yaw_rate, accel=st.accel,
            )
            for st in track.states
        )
        moved_track = TrackVariables(states=moved_states, timestamps=track.timestamps)
        moved_clouds = []
        for cl in clouds:
            pts = cl.points.copy()
            pts[:, 0], pts[:, 1] = move_xy(cl.points[:, 0], cl.points[:, 1])
            moved_clouds.append(AssociatedCloud(cl.track_id, cl.sample_index, pts))
        moved_egos = [Pose2(*move_xy(e.x, e.y), e.theta + rot) for e in egos]
        moved = total_cost(moved_track, moved_clouds, moved_egos, zs, dims, cfg)
        assert moved == pytest.approx(base, abs=1e-6)

    def test_zero_dynamics_reduces_to_static_evaluation(self, rng):
        # with speed = yaw_rate = accel = 0 compensation is the identity, so
        # the sensor terms equal a direct static point-in-box evaluation
        points = rng.uniform(-3, 3, size=(40, 2))
        static = cloud_at(points, dt=0.0)
        timed = cloud_at(points, dt=0.07)
        candidate = state()
        assert inlier_cost(candidate, 1.0, DIMS, timed) == inlier_cost(
            candidate, 1.0, DIMS, static
        )
        assert fitness_cost(candidate, DIMS, timed) == fitness_cost(candidate, DIMS, static)


class TestTrackVariables:
    def test_requires_two_states(self):
        with pytest.raises(ValueError):
            TrackVariables(states=(state(),), timestamps=(0.0,))

    def test_requires_increasing_timestamps(self):
        with pytest.raises(ValueError):
            TrackVariables(states=(state(), state()), timestamps=(0.1, 0.1))
