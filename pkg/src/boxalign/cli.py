"""Command-line entry point.

Subcommands: ``synth`` (generate a synthetic scene with ground truth),
``correct`` (run the per-track pose correction), ``metrics`` (emit the
metric reports), and ``perturb`` (inject a measured error spread into the
annotations of a scene).

Configuration is a plain-text ``key = value`` file; ``#`` starts a
comment, unknown keys are rejected, and command-line flags override file
values.  Exit codes: 0 success, 1 data error, 2 usage or config error.
No command mutates its input directory.
"""

from __future__ import annotations

import argparse
import json
import re
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from .association import InflationParams
from .geometry import BoxDims, Pose2
from .metrics import (
    DEFAULT_MIN_SPEED,
    BoxSetMismatch,
    build_report,
    compute_error_records,
    compute_ipd,
    perturb_annotations,
)
from .motion import TrackState
from .objective import ObjectiveConfig
from .optimizer import SearchConfig
from .pipeline import correct_scene
from .report import write_report_files
from .sceneio import (
    Scene,
    SceneFormatError,
    read_corrected,
    read_scene,
    read_truth,
    write_corrected,
    write_scene,
    write_truth,
)
from .synth import EgoSpec, GroundTruth, IdMismatch, SynthConfig, TrackSpec, evaluate_against_truth, generate


class ConfigError(Exception):
    pass


_SCALAR_KEYS = {
    "objective.motion_weight_scale",
    "objective.sensor_weight",
    "objective.ego_weight",
    "objective.annotation_frequency",
    "search.initial_step_fraction",
    "search.shrink_factor",
    "search.step_tolerance",
    "search.max_evaluations",
    "association.base_margin",
    "association.sensor_period",
    "association.lateral_margin",
    "association.bottom_deflate",
    "synth.num_samples",
    "synth.annotation_frequency",
    "synth.sensor_period",
    "synth.scan_phase",
    "synth.seed",
    "ego.x",
    "ego.y",
    "ego.theta",
    "ego.speed",
    "ego.yaw_rate",
}

_TRACK_KEY = re.compile(r"^track\.(\d+)\.([a-z_]+)$")
_TRACK_FIELDS = {
    "id", "x", "y", "theta", "speed", "yaw_rate", "accel",
    "length", "width", "height", "z", "points_per_face", "noise_sigma",
    "longitudinal_offset", "time_slice",
}


def parse_config_file(path: str) -> dict[str, str]:
    """Read a key=value config file, rejecting unknown or duplicate keys."""
    cfg_path = Path(path)
    if not cfg_path.is_file():
        raise ConfigError(f"config file not found: {cfg_path}")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(cfg_path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{cfg_path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        match = _TRACK_KEY.match(key)
        if match:
            if match.group(2) not in _TRACK_FIELDS:
                raise ConfigError(f"{cfg_path}:{lineno}: unknown track field {key!r}")
        elif key not in _SCALAR_KEYS:
            raise ConfigError(f"{cfg_path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{cfg_path}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def _get_float(cfg: dict[str, str], key: str, default: float | None = None) -> float | None:
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: {cfg[key]!r}") from exc


def _get_int(cfg: dict[str, str], key: str, default: int | None = None) -> int | None:
    if key not in cfg:
        return default
    try:
        return int(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer: {cfg[key]!r}") from exc


def build_objective_config(cfg: dict[str, str], scene_frequency: float) -> ObjectiveConfig:
    frequency = _get_float(cfg, "objective.annotation_frequency", scene_frequency)
    scale = _get_float(cfg, "objective.motion_weight_scale", 10.0)
    try:
        return ObjectiveConfig(
            annotation_frequency=frequency,
            motion_weight_matrix=scale * frequency * np.eye(6),
            sensor_weight=_get_float(cfg, "objective.sensor_weight", 1.0e3),
            ego_weight=_get_float(cfg, "objective.ego_weight", 1.0e-4),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_search_config(cfg: dict[str, str]) -> SearchConfig:
    try:
        return SearchConfig(
            initial_step_fraction=_get_float(cfg, "search.initial_step_fraction", 0.1),
            shrink_factor=_get_float(cfg, "search.shrink_factor", 0.5),
            step_tolerance=_get_float(cfg, "search.step_tolerance", 1.0e-3),
            max_evaluations=_get_int(cfg, "search.max_evaluations"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_inflation(cfg: dict[str, str], scene_period: float) -> InflationParams:
    try:
        return InflationParams(
            sensor_period=_get_float(cfg, "association.sensor_period", scene_period),
            base_margin=_get_float(cfg, "association.base_margin", 1.0),
            lateral_margin=_get_float(cfg, "association.lateral_margin", 0.5),
            bottom_deflate=_get_float(cfg, "association.bottom_deflate", 0.2),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_synth_config(cfg: dict[str, str], seed_override: int | None = None) -> SynthConfig:
    for key in ("synth.num_samples", "synth.annotation_frequency", "synth.sensor_period"):
        if key not in cfg:
            raise ConfigError(f"missing required key {key!r}")
    track_fields: dict[int, dict[str, str]] = {}
    for key, value in cfg.items():
        match = _TRACK_KEY.match(key)
        if match:
            track_fields.setdefault(int(match.group(1)), {})[match.group(2)] = value

    tracks = []
    for index in sorted(track_fields):
        fields = track_fields[index]
        sub = {f"track.{index}.{name}": value for name, value in fields.items()}

        def fget(name: str, default: float) -> float:
            return _get_float(sub, f"track.{index}.{name}", default)

        try:
            tracks.append(TrackSpec(
                track_id=fields.get("id", f"t{index}"),
                initial=TrackState(
                    pose=Pose2(fget("x", 0.0), fget("y", 0.0), fget("theta", 0.0)),
                    speed=fget("speed", 0.0),
                    yaw_rate=fget("yaw_rate", 0.0),
                    accel=fget("accel", 0.0),
                ),
                dims=BoxDims(fget("length", 4.5), fget("width", 2.0), fget("height", 1.7)),
                z=fget("z", 1.0),
                points_per_face=_get_int(sub, f"track.{index}.points_per_face", 25),
                noise_sigma=fget("noise_sigma", 0.02),
                longitudinal_offset=fget("longitudinal_offset", 0.0),
                time_slice=fget("time_slice", 0.0),
            ))
        except ValueError as exc:
            raise ConfigError(f"track {index}: {exc}") from exc

    seed = seed_override if seed_override is not None else _get_int(cfg, "synth.seed", 0)
    try:
        return SynthConfig(
            num_samples=_get_int(cfg, "synth.num_samples"),
            annotation_frequency=_get_float(cfg, "synth.annotation_frequency"),
            sensor_period=_get_float(cfg, "synth.sensor_period"),
            scan_phase=_get_float(cfg, "synth.scan_phase", 0.0),
            tracks=tuple(tracks),
            ego=EgoSpec(
                pose=Pose2(
                    _get_float(cfg, "ego.x", 0.0),
                    _get_float(cfg, "ego.y", 0.0),
                    _get_float(cfg, "ego.theta", 0.0),
                ),
                speed=_get_float(cfg, "ego.speed", 0.0),
                yaw_rate=_get_float(cfg, "ego.yaw_rate", 0.0),
            ),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_synth(args) -> int:
    cfg = parse_config_file(args.config)
    synth_cfg = build_synth_config(cfg, seed_override=args.seed)
    scene, truth = generate(synth_cfg)
    out = Path(args.out)
    write_scene(scene, out)
    write_truth(truth.states, out / "truth.jsonl")
    print(f"wrote {len(scene.annotations)} annotations, "
          f"{sum(len(c) for c in scene.clouds)} points to {out}")
    return 0


def cmd_correct(args) -> int:
    cfg = parse_config_file(args.config) if args.config else {}
    scene = read_scene(args.scene)
    objective_config = build_objective_config(cfg, scene.metadata.annotation_frequency)
    search_config = build_search_config(cfg)
    inflation = build_inflation(cfg, scene.metadata.sensor_period)

    def progress(diag) -> None:
        if diag.skipped is not None:
            print(f"track {diag.track_id}: skipped ({diag.skipped})")
        else:
            print(
                f"track {diag.track_id}: cost {diag.initial_cost:.6g} -> "
                f"{diag.final_cost:.6g} in {diag.evaluations} evaluations"
            )

    start = time.perf_counter()
    result = correct_scene(
        scene,
        objective_config=objective_config,
        search_config=search_config,
        inflation=inflation,
        workers=args.threads,
        progress=progress,
    )
    elapsed = time.perf_counter() - start
    write_corrected(result, args.out)
    print(f"corrected {len(result.corrected)} boxes in {elapsed:.2f} s")
    return 0


def cmd_metrics(args) -> int:
    scene = read_scene(args.scene)
    corrected = read_corrected(args.corrected)
    inflation = InflationParams(sensor_period=scene.metadata.sensor_period)
    records = compute_error_records(scene.annotations, corrected, scene.ego)
    ipd = compute_ipd(scene, scene.annotations, corrected, inflation, args.min_speed)
    report = build_report(records, ipd, min_speed=args.min_speed)
    write_report_files(report, args.report)
    if args.truth:
        truth = GroundTruth(states=read_truth(Path(args.truth) / "truth.jsonl"))
        evaluation = evaluate_against_truth(corrected, truth)
        summary = evaluation.summary
        (Path(args.report) / "truth_summary.json").write_text(
            json.dumps({
                "count": summary.count,
                "median_position_error": summary.median_position_error,
                "p95_position_error": summary.p95_position_error,
                "median_heading_error": summary.median_heading_error,
                "p95_heading_error": summary.p95_heading_error,
                "median_speed_error": summary.median_speed_error,
                "p95_speed_error": summary.p95_speed_error,
            }, indent=2) + "\n"
        )
    ipd_text = "undefined" if report.ipd is None else f"{report.ipd:+.4%}"
    print(f"records: {report.record_count} ({report.filtered_count} after speed filter), "
          f"inlier points difference: {ipd_text}")
    return 0


def cmd_perturb(args) -> int:
    if args.sdede_x < 0 or args.sdede_y < 0:
        raise ConfigError("spread values must be >= 0")
    scene = read_scene(args.scene)
    perturbed = perturb_annotations(
        scene.annotations, args.sdede_x, args.sdede_y, args.seed
    )
    out = Path(args.out)
    write_scene(
        Scene(
            metadata=scene.metadata,
            annotations=perturbed,
            ego=scene.ego,
            clouds=scene.clouds,
        ),
        out,
    )
    truth_file = Path(args.scene) / "truth.jsonl"
    if truth_file.is_file():
        shutil.copyfile(truth_file, out / "truth.jsonl")
    print(f"perturbed {len(perturbed)} annotations into {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boxalign",
        description="Correct scan-time pose errors in 3D box annotations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate a synthetic scene with ground truth")
    p_synth.add_argument("--config", required=True, help="key=value config file")
    p_synth.add_argument("--out", required=True, help="output scene directory")
    p_synth.add_argument("--seed", type=int, default=None, help="override synth.seed")
    p_synth.set_defaults(func=cmd_synth)

    p_correct = sub.add_parser("correct", help="correct the annotations of a scene")
    p_correct.add_argument("--scene", required=True, help="input scene directory")
    p_correct.add_argument("--out", required=True, help="output directory")
    p_correct.add_argument("--threads", type=int, default=1, help="worker threads")
    p_correct.add_argument("--config", default=None, help="key=value config file")
    p_correct.set_defaults(func=cmd_correct)

    p_metrics = sub.add_parser("metrics", help="compute annotation-quality metrics")
    p_metrics.add_argument("--scene", required=True, help="input scene directory")
    p_metrics.add_argument("--corrected", required=True, help="corrected output directory")
    p_metrics.add_argument("--truth", default=None, help="directory holding truth.jsonl")
    p_metrics.add_argument("--min-speed", type=float, default=DEFAULT_MIN_SPEED,
                           help="minimum |speed| for a box to enter the statistics")
    p_metrics.add_argument("--report", required=True, help="report output directory")
    p_metrics.set_defaults(func=cmd_metrics)

    p_perturb = sub.add_parser("perturb", help="inject position noise into annotations")
    p_perturb.add_argument("--scene", required=True, help="input scene directory")
    p_perturb.add_argument("--sdede-x", type=float, required=True,
                           help="3-sigma longitudinal spread to inject [m]")
    p_perturb.add_argument("--sdede-y", type=float, required=True,
                           help="3-sigma lateral spread to inject [m]")
    p_perturb.add_argument("--seed", type=int, default=0)
    p_perturb.add_argument("--out", required=True, help="output scene directory")
    p_perturb.set_defaults(func=cmd_perturb)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SceneFormatError, BoxSetMismatch, IdMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
