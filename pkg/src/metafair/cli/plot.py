"""Bias-vs-quality scatter plots as plain SVG.

Marker shape encodes the meta method, fill the debias method and opacity the
stage. Every marker carries data-label / data-x / data-y attributes and the root
element carries the axis limits and plot-area geometry, so tests can check the
layout without rasterising.
"""

import logging
import os
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from metafair.errors import EmptyPlot, IoError
from metafair.pipeline.report import EvalReport
from metafair.security.paths import OutputGuard
from metafair.store.textio import format_float

logger = logging.getLogger(__name__)

WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 80, 160, 30, 60
PAD_FRACTION = 0.05
MARKER_SIZE = 7.0
TICKS = 5

SOURCE_SHAPE = "star"
SHAPES = {
    "avg": "circle",
    "conc": "square",
    "lle": "triangle",
    "gle": "pentagon",
    "aeme": "diamond",
}
FILLS = {
    "none": "#ff7f0e",
    "hard": "#2ca02c",
    "inlp": "#ffcc00",
    "dict": "#1f77b4",
}
MULTI_FILL = "#9467bd"
# stage shading: pre light, post intermediate, both dark
OPACITY = {
    "mssd-pre": 0.35,
    "mssd-post": 0.65,
    "mssd-both": 1.0,
}


def _px(value: float) -> str:
    return f"{value:.3f}"


def axis_limits(values: list[float]) -> tuple[float, float]:
    """Data min/max padded by 5% of the range (or of |value| for a single value)."""
    lo, hi = min(values), max(values)
    span = hi - lo
    if span == 0.0:
        span = abs(lo) if lo != 0.0 else 1.0
    pad = PAD_FRACTION * span
    return lo - pad, hi + pad


def parse_label(label: str) -> tuple[str, str, str]:
    """(regime, debias, meta) from `regime/debias/meta[@num]`; unknown parts read as ''."""
    parts = label.split("/")
    parts += [""] * (3 - len(parts))
    meta = parts[2].split("@", 1)[0]
    return parts[0], parts[1], meta


def marker_style(label: str) -> tuple[str, str, float]:
    regime, debias, meta = parse_label(label)
    shape = SOURCE_SHAPE if regime == "source" else SHAPES.get(meta, "cross")
    fill = MULTI_FILL if "+" in debias else FILLS.get(debias, FILLS["none"])
    return shape, fill, OPACITY.get(regime, 1.0)


def _shape_element(shape: str, fill: str, opacity: float) -> str:
    s = MARKER_SIZE
    style = f'fill="{fill}" fill-opacity="{opacity}" stroke="#000000" stroke-width="1"'
    if shape == "circle":
        return f'<circle cx="0" cy="0" r="{_px(s)}" {style}/>'
    if shape == "square":
        side = _px(2 * s)
        return f'<rect x="{_px(-s)}" y="{_px(-s)}" width="{side}" height="{side}" {style}/>'
    if shape == "triangle":
        points = f"0,{_px(-s)} {_px(s)},{_px(s)} {_px(-s)},{_px(s)}"
    elif shape == "diamond":
        points = f"0,{_px(-s)} {_px(s)},0 0,{_px(s)} {_px(-s)},0"
    elif shape == "pentagon":
        angles = np.deg2rad(-90.0 + 72.0 * np.arange(5))
        points = " ".join(f"{_px(s * np.cos(a))},{_px(s * np.sin(a))}" for a in angles)
    elif shape == "star":
        inner = s / 2.5
        points = (
            f"0,{_px(-s)} {_px(inner)},{_px(-inner)} {_px(s)},0 {_px(inner)},{_px(inner)} "
            f"0,{_px(s)} {_px(-inner)},{_px(inner)} {_px(-s)},0 {_px(-inner)},{_px(-inner)}"
        )
    else:
        return (
            f'<path d="M{_px(-s)},{_px(-s)} L{_px(s)},{_px(s)} M{_px(-s)},{_px(s)} '
            f'L{_px(s)},{_px(-s)}" stroke="{fill}" stroke-opacity="{opacity}" stroke-width="2"/>'
        )
    return f'<polygon points="{points}" {style}/>'


def render_scatter(
    points: list[tuple[str, float, float]],
    x_metric: str,
    y_metric: str,
    annotation: str | None = "lower x is better",
) -> str:
    """SVG text for (label, x, y) points."""
    if not points:
        raise EmptyPlot("Nothing to plot")
    xmin, xmax = axis_limits([p[1] for p in points])
    ymin, ymax = axis_limits([p[2] for p in points])
    x0, x1 = LEFT, WIDTH - RIGHT
    y0, y1 = TOP, HEIGHT - BOTTOM

    def sx(v: float) -> float:
        return x0 + (v - xmin) / (xmax - xmin) * (x1 - x0)

    def sy(v: float) -> float:
        return y1 - (v - ymin) / (ymax - ymin) * (y1 - y0)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'data-xmin="{format_float(xmin)}" data-xmax="{format_float(xmax)}" '
        f'data-ymin="{format_float(ymin)}" data-ymax="{format_float(ymax)}" '
        f'data-plot-left="{x0}" data-plot-right="{x1}" '
        f'data-plot-top="{y0}" data-plot-bottom="{y1}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<rect class="plot-area" x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
        f'fill="none" stroke="#000000"/>',
    ]
    for i in range(TICKS):
        fx = xmin + (xmax - xmin) * i / (TICKS - 1)
        fy = ymin + (ymax - ymin) * i / (TICKS - 1)
        out.append(
            f'<text class="tick-x" x="{_px(sx(fx))}" y="{y1 + 16}" font-size="10" '
            f'text-anchor="middle">{fx:.3g}</text>'
        )
        out.append(
            f'<text class="tick-y" x="{x0 - 6}" y="{_px(sy(fy) + 3)}" font-size="10" '
            f'text-anchor="end">{fy:.3g}</text>'
        )
    out.append(
        f'<text class="axis-x" x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 20}" font-size="12" '
        f'text-anchor="middle">{escape(x_metric)}</text>'
    )
    out.append(
        f'<text class="axis-y" x="16" y="{(y0 + y1) / 2:.1f}" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">'
        f"{escape(y_metric)}</text>"
    )
    if annotation:
        out.append(
            f'<text class="annotation" x="{x1}" y="{TOP - 10}" font-size="11" '
            f'text-anchor="end">{escape(annotation)}</text>'
        )
    for label, x, y in points:
        shape, fill, opacity = marker_style(label)
        out.append(
            f'<g class="marker" data-label={quoteattr(label)} data-x="{format_float(x)}" '
            f'data-y="{format_float(y)}" data-shape="{shape}" '
            f'transform="translate({_px(sx(x))},{_px(sy(y))})">'
            f"<title>{escape(label)}</title>{_shape_element(shape, fill, opacity)}</g>"
        )
    legend_x = x1 + 20
    for i, (label, _, _) in enumerate(points):
        shape, fill, opacity = marker_style(label)
        y = TOP + 10 + 18 * i
        out.append(
            f'<g class="legend" transform="translate({legend_x},{y})">'
            f"{_shape_element(shape, fill, opacity)}"
            f'<text x="12" y="4" font-size="10">{escape(label)}</text></g>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def shared_points(
    x_report: EvalReport, x_metric: str, y_report: EvalReport, y_metric: str
) -> list[tuple[str, float, float]]:
    """(label, x, y) for labels scored on both metrics, in x_report order."""
    xs, ys = x_report.scores(x_metric), y_report.scores(y_metric)
    return [(label, xs[label], ys[label]) for label in xs if label in ys]


def plot_scatter(
    x_report: EvalReport,
    x_metric: str,
    y_report: EvalReport,
    y_metric: str,
    out: str,
    guard: OutputGuard | None = None,
    annotation: str | None = "lower x is better",
) -> str:
    """Write the scatter of x_metric against y_metric to `out`; returns the SVG text."""
    points = shared_points(x_report, x_metric, y_report, y_metric)
    if not points:
        raise EmptyPlot(f"No label has both {x_metric!r} and {y_metric!r} scores")
    svg = render_scatter(points, x_metric, y_metric, annotation)
    if guard is not None:
        guard.check(out)
    try:
        parent = os.path.dirname(str(out))
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as f:
            f.write(svg)
    except OSError as e:
        raise IoError(f"Cannot write {out}: {e}") from e
    logger.info(f"Plotted {len(points)} points to {out}")
    return svg
