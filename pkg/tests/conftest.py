import hypothesis
import numpy as np
import pytest

from boxalign.geometry import BoxDims, Pose2
from boxalign.motion import TrackState
from boxalign.synth import EgoSpec, SynthConfig, TrackSpec, generate

hypothesis.settings.register_profile(
    "default", max_examples=100, deadline=None
)
hypothesis.settings.load_profile("default")


def small_scene(time_slices=None, noise_sigma=0.01, seed=11):
    """Three-track scene for pipeline-level tests; optional injected errors."""
    time_slices = time_slices or [0.0, 0.0, 0.0]
    tracks = (
        TrackSpec(
            track_id="a",
            initial=TrackState(pose=Pose2(30.0, 8.0, 0.0), speed=15.0, yaw_rate=0.0, accel=0.0),
            dims=BoxDims(4.5, 2.0, 1.6),
            z=0.8,
            points_per_face=16,
            noise_sigma=noise_sigma,
            time_slice=time_slices[0],
        ),
        TrackSpec(
            track_id="b",
            initial=TrackState(pose=Pose2(-20.0, -30.0, 1.2), speed=10.0, yaw_rate=0.05, accel=0.5),
            dims=BoxDims(5.0, 2.2, 1.8),
            z=0.9,
            points_per_face=16,
            noise_sigma=noise_sigma,
            time_slice=time_slices[1],
        ),
        TrackSpec(
            track_id="c",
            initial=TrackState(pose=Pose2(45.0, -40.0, -2.0), speed=22.0, yaw_rate=-0.04, accel=0.0),
            dims=BoxDims(4.2, 1.9, 1.5),
            z=0.75,
            points_per_face=16,
            noise_sigma=noise_sigma,
            time_slice=time_slices[2],
        ),
    )
    config = SynthConfig(
        num_samples=6,
        annotation_frequency=10.0,
        sensor_period=0.1,
        tracks=tracks,
        ego=EgoSpec(pose=Pose2(0.0, 0.0, 0.3), speed=5.0),
        scan_phase=0.0,
        seed=seed,
    )
    return generate(config)


@pytest.fixture(scope="session")
def clean_scene():
    return small_scene()


@pytest.fixture(scope="session")
def distorted_scene():
    return small_scene(time_slices=[0.03, -0.03, 0.03])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
