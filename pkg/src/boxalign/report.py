"""CSV and standalone-SVG emission for the metric suite.

Plots are generated as self-contained SVG strings with fixed layout and
number formatting, so identical reports serialize byte-identically.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path

from .metrics import Histogram, MetricsReport

_WIDTH = 640
_HEIGHT = 400
_MARGIN_LEFT = 60
_MARGIN_RIGHT = 20
_MARGIN_TOP = 40
_MARGIN_BOTTOM = 50


def _fmt(value: float) -> str:
    if value == math.inf:
        return "inf"
    return f"{value:.6g}"


def _svg_open(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]


def _svg_axes(parts: list[str], xlabel: str, ylabel: str) -> None:
    x0, y0 = _MARGIN_LEFT, _HEIGHT - _MARGIN_BOTTOM
    x1, y1 = _WIDTH - _MARGIN_RIGHT, _MARGIN_TOP
    parts.append(
        f'<path d="M {x0} {y1} L {x0} {y0} L {x1} {y0}" stroke="black" fill="none"/>'
    )
    parts.append(
        f'<text x="{(x0 + x1) / 2:.1f}" y="{_HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{ylabel}</text>'
    )


def render_histogram_svg(histogram: Histogram, title: str, xlabel: str) -> str:
    parts = _svg_open(title)
    _svg_axes(parts, xlabel, "count")
    x0, y0 = _MARGIN_LEFT, _HEIGHT - _MARGIN_BOTTOM
    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = y0 - _MARGIN_TOP
    counts = histogram.counts
    edges = histogram.edges
    max_count = max(counts) if counts else 0
    scale = plot_h / max_count if max_count else 0.0
    span = edges[-1] - edges[0]
    span = span if span > 0 else 1.0
    for i, count in enumerate(counts):
        bx0 = x0 + (edges[i] - edges[0]) / span * plot_w
        bx1 = x0 + (edges[i + 1] - edges[0]) / span * plot_w
        height = count * scale
        parts.append(
            f'<rect x="{bx0:.2f}" y="{y0 - height:.2f}" width="{bx1 - bx0:.2f}" '
            f'height="{height:.2f}" fill="#4878a8" stroke="white" stroke-width="0.5"/>'
        )
    parts.append(
        f'<text x="{x0:.1f}" y="{y0 + 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{_fmt(edges[0])}</text>'
    )
    parts.append(
        f'<text x="{x0 + plot_w:.1f}" y="{y0 + 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">{_fmt(edges[-1])}</text>'
    )
    parts.append(
        f'<text x="{x0 - 6}" y="{_MARGIN_TOP + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{max_count}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_percentile_svg(bins, title: str, xlabel: str) -> str:
    """Box plot of the 5/25/50/75/95 percentiles per interval."""
    parts = _svg_open(title)
    _svg_axes(parts, xlabel, "position error [m]")
    x0, y0 = _MARGIN_LEFT, _HEIGHT - _MARGIN_BOTTOM
    plot_w = _WIDTH - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = y0 - _MARGIN_TOP
    populated = [b for b in bins if b.percentiles is not None]
    top = max((b.percentiles[4] for b in populated), default=1.0)
    top = top if top > 0 else 1.0
    slot = plot_w / max(len(bins), 1)

    def y_of(value: float) -> float:
        return y0 - value / top * plot_h

    for i, b in enumerate(bins):
        cx = x0 + (i + 0.5) * slot
        label = f"{_fmt(b.lower)}-{_fmt(b.upper)}"
        parts.append(
            f'<text x="{cx:.1f}" y="{y0 + 16}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{label}</text>'
        )
        if b.percentiles is None:
            continue
        p5, p25, p50, p75, p95 = b.percentiles
        half = slot * 0.25
        parts.append(
            f'<line x1="{cx:.1f}" y1="{y_of(p5):.2f}" x2="{cx:.1f}" y2="{y_of(p95):.2f}" '
            f'stroke="black"/>'
        )
        parts.append(
            f'<rect x="{cx - half:.1f}" y="{y_of(p75):.2f}" width="{2 * half:.1f}" '
            f'height="{max(y_of(p25) - y_of(p75), 0.0):.2f}" '
            f'fill="#8ab17d" stroke="black"/>'
        )
        parts.append(
            f'<line x1="{cx - half:.1f}" y1="{y_of(p50):.2f}" x2="{cx + half:.1f}" '
            f'y2="{y_of(p50):.2f}" stroke="black" stroke-width="2"/>'
        )
    parts.append(
        f'<text x="{x0 - 6}" y="{_MARGIN_TOP + 4}" text-anchor="end" '
        f'font-family="sans-serif" font-size="11">{_fmt(top)}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write_histogram_csv(path: Path, histogram: Histogram) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for i, count in enumerate(histogram.counts):
            writer.writerow([repr(histogram.edges[i]), repr(histogram.edges[i + 1]), count])


def _percentile_rows(bins) -> list[list]:
    rows = []
    for b in bins:
        row = [_fmt(b.lower), _fmt(b.upper), b.count]
        row += list(map(repr, b.percentiles)) if b.percentiles else ["", "", "", "", ""]
        rows.append(row)
    return rows


def _write_grouped_csv(path: Path, bins) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_lo", "bin_hi", "count", "p5", "p25", "p50", "p75", "p95"])
        writer.writerows(_percentile_rows(bins))


def write_report_files(report: MetricsReport, out_dir: str | os.PathLike) -> None:
    """Emit report.json, the CSV tables, and the SVG plots."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    summary = {
        "record_count": report.record_count,
        "filtered_count": report.filtered_count,
        "min_speed": report.min_speed,
        "ipd": report.ipd,
        "sdede_x": report.sdede_x,
        "sdede_y": report.sdede_y,
    }
    (root / "report.json").write_text(json.dumps(summary, indent=2, allow_nan=False) + "\n")

    _write_histogram_csv(root / "ede_histogram.csv", report.ede_histogram)
    with open(root / "dede_histograms.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["axis", "bin_lo", "bin_hi", "count"])
        for axis, histogram in (("x", report.dede_x_histogram), ("y", report.dede_y_histogram)):
            for i, count in enumerate(histogram.counts):
                writer.writerow(
                    [axis, repr(histogram.edges[i]), repr(histogram.edges[i + 1]), count]
                )
    _write_grouped_csv(root / "grouped_speed.csv", report.speed_bins)
    _write_grouped_csv(root / "grouped_distance.csv", report.distance_bins)

    (root / "ede_histogram.svg").write_text(render_histogram_svg(
        report.ede_histogram, "Position error distribution", "error [m]"
    ))
    (root / "dede_x_histogram.svg").write_text(render_histogram_svg(
        report.dede_x_histogram, "Longitudinal error distribution", "error along heading [m]"
    ))
    (root / "dede_y_histogram.svg").write_text(render_histogram_svg(
        report.dede_y_histogram, "Lateral error distribution", "error across heading [m]"
    ))
    (root / "grouped_speed.svg").write_text(render_percentile_svg(
        report.speed_bins, "Position error by speed", "speed [m/s]"
    ))
    (root / "grouped_distance.svg").write_text(render_percentile_svg(
        report.distance_bins, "Position error by distance to ego", "distance [m]"
    ))
