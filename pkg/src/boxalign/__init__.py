"""Correct scan-time pose errors in 3D bounding-box annotations.

Active sensors observe moving objects at per-point capture times, so boxes
annotated at a common reference timestamp end up displaced along the
direction of travel.  This package jointly estimates each track's pose and
dynamics against a constant-turn-rate-and-acceleration motion model and
motion-compensated sensor detections, plus the metric suite and synthetic
oracle to quantify and verify the correction.
"""

from .association import AssociatedCloud, InflationParams, MissingSpeedEstimate, associate
from .geometry import (
    BoxAnnotation,
    BoxDims,
    NormalizedBoxCoords,
    Pose2,
    footprint_contains,
    from_box_frame,
    to_box_frame,
    volume_contains,
    wrap_angle,
)
from .metrics import (
    BoxSetMismatch,
    ErrorRecord,
    InsufficientData,
    MetricsReport,
    build_report,
    compute_error_records,
    compute_ipd,
    compute_sdede,
    group_errors,
    perturb_annotations,
)
from .motion import (
    OMEGA_EPS,
    StateDelta,
    TrackState,
    compensate_point,
    compensate_xy,
    ctra_delta,
    ctra_predict,
    ctra_residual,
)
from .objective import (
    LengthMismatch,
    ObjectiveConfig,
    TrackVariables,
    ego_cost,
    fitness_cost,
    inlier_cost,
    motion_cost,
    total_cost,
)
from .optimizer import (
    PatternSearchResult,
    SearchBounds,
    SearchConfig,
    TrackTooShort,
    initial_guess,
    naive_speeds,
    optimize_track,
    pattern_search,
)
from .pipeline import CorrectionResult, Dynamics, TrackDiagnostics, correct_scene
from .sceneio import (
    InvariantViolation,
    MalformedRecord,
    MissingFile,
    Scene,
    SceneFormatError,
    SceneMetadata,
    TimedPoint,
    read_corrected,
    read_scene,
    read_truth,
    scenes_equal,
    write_corrected,
    write_scene,
    write_truth,
)
from .synth import (
    EgoSpec,
    GroundTruth,
    IdMismatch,
    SynthConfig,
    TrackSpec,
    evaluate_against_truth,
    generate,
)

__version__ = "0.1.0"
