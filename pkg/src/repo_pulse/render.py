"""SVG line charts for metric series.

Charts are written by hand as plain SVG text: no plotting stack, and the
output is byte-stable for identical inputs so it can be diffed and
golden-tested.  Null values break the line into separate polylines.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from decimal import Decimal
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

from . import jsonio
from .errors import EmptySeries, SchemaError, StyleError
from .metrics import IntervalGrid, MetricSeries, read_metrics

logger = logging.getLogger(__name__)

_HEX_COLOR = re.compile(r"#[0-9a-fA-F]{6}")
_SAFE_NAME = re.compile(r"[A-Za-z0-9_.-]+")
MAX_X_LABELS = 8
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 50, 50, 70


@dataclass(frozen=True)
class ChartStyle:
    width_px: int = 900
    height_px: int = 450
    line_color: str = "#1f77b4"
    grid: bool = True
    # None: derived from the series (name, unit)
    title: str | None = None
    x_label: str = "bucket start (UTC)"
    y_label: str | None = None
    font_family: str = "sans-serif"

    def __post_init__(self) -> None:
        for name in ("width_px", "height_px"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
                raise StyleError(f"{name} must be a positive integer, got {value!r}")
        if self.width_px <= MARGIN_LEFT + MARGIN_RIGHT or self.height_px <= MARGIN_TOP + MARGIN_BOTTOM:
            raise StyleError(f"chart of {self.width_px}x{self.height_px} px leaves no room to plot")
        if not isinstance(self.line_color, str) or not _HEX_COLOR.fullmatch(self.line_color):
            raise StyleError(f"line_color must look like #rrggbb, got {self.line_color!r}")
        if not isinstance(self.grid, bool):
            raise StyleError(f"grid must be true or false, got {self.grid!r}")
        for name in ("title", "x_label", "y_label", "font_family"):
            value = getattr(self, name)
            if value is not None and not isinstance(value, str):
                raise StyleError(f"{name} must be text, got {value!r}")


def load_style(path: str | Path | None) -> ChartStyle:
    """Read a flat JSON object of ChartStyle fields; unknown keys are an error."""
    if path is None:
        return ChartStyle()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise StyleError(f"cannot read style file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise StyleError(f"{path}: style must be a JSON object")
    known = {f.name for f in fields(ChartStyle)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise StyleError(f"{path}: unknown style key(s): {', '.join(unknown)}")
    return ChartStyle(**raw)


def _nice_step(span: float) -> Decimal:
    """Largest 1/2/5 x 10^k step that still gives at least four intervals."""
    target = span / 4
    exp = math.floor(math.log10(target))
    for mantissa in (5, 2, 1):
        step = Decimal(mantissa).scaleb(exp)
        if step <= Decimal(repr(target)):
            return step
    return Decimal(5).scaleb(exp - 1)


def y_ticks(lo: float, hi: float) -> tuple[list[Decimal], float, float]:
    """Tick values and the axis range they span; the range covers ``[lo, hi]``."""
    if hi <= lo:
        hi = lo + 1
    step = _nice_step(hi - lo)
    first = math.floor(Decimal(repr(lo)) / step)
    last = math.ceil(Decimal(repr(hi)) / step)
    ticks = [step * i for i in range(first, last + 1)]
    return ticks, float(ticks[0]), float(ticks[-1])


def _format_tick(value: Decimal) -> str:
    text = format(value.normalize(), "f")
    return "0" if text in ("-0", "0") else text


def _num(x: float) -> str:
    text = f"{x:.2f}"
    return "0.00" if text == "-0.00" else text


def _iso_date(t: int) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%d")


def _segments(values: Sequence[float | None]) -> list[list[tuple[int, float]]]:
    runs: list[list[tuple[int, float]]] = []
    current: list[tuple[int, float]] = []
    for k, v in enumerate(values):
        if v is None:
            if current:
                runs.append(current)
            current = []
        else:
            current.append((k, float(v)))
    if current:
        runs.append(current)
    return runs


def render_series(series: MetricSeries, grid: IntervalGrid, style: ChartStyle = ChartStyle()) -> str:
    values = list(series.values)
    if not values:
        raise EmptySeries(f"series {series.name!r} has no buckets")
    if any(v is not None and not math.isfinite(v) for v in values):
        raise EmptySeries(f"series {series.name!r} contains non-finite values")
    present = [float(v) for v in values if v is not None]
    if not present:
        logger.info("series %s has no defined values; drawing empty axes", series.name)

    W, H = style.width_px, style.height_px
    left, right = MARGIN_LEFT, W - MARGIN_RIGHT
    top, bottom = MARGIN_TOP, H - MARGIN_BOTTOM
    n = len(values)
    lo = min(0.0, min(present)) if present else 0.0
    hi = max(present) if present else 1.0
    ticks, axis_lo, axis_hi = y_ticks(lo, hi)

    def x_of(k: int) -> float:
        return (left + right) / 2 if n == 1 else left + (right - left) * k / (n - 1)

    def y_of(v: float) -> float:
        return bottom - (bottom - top) * (v - axis_lo) / (axis_hi - axis_lo)

    title = series.name if style.title is None else style.title
    y_label = series.unit if style.y_label is None else style.y_label
    font = quoteattr(style.font_family)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        f"font-family={font} font-size=\"12\">",
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="#ffffff"/>',
        f'<text class="title" x="{_num(W / 2)}" y="{_num(top / 2 + 6)}" text-anchor="middle" font-size="16">'
        f"{escape(title)}</text>",
    ]

    out.append('<g class="y-axis">')
    for tick in ticks:
        y = _num(y_of(float(tick)))
        if style.grid:
            out.append(f'<line class="grid" x1="{left}" y1="{y}" x2="{right}" y2="{y}" stroke="#dddddd"/>')
        out.append(f'<line x1="{left - 5}" y1="{y}" x2="{left}" y2="{y}" stroke="#333333"/>')
        out.append(
            f'<text x="{left - 8}" y="{y}" text-anchor="end" dominant-baseline="middle">{_format_tick(tick)}</text>'
        )
    out.append("</g>")

    label_every = max(1, math.ceil(n / MAX_X_LABELS))
    out.append('<g class="x-axis">')
    for k in range(0, n, label_every):
        x = _num(x_of(k))
        if style.grid:
            out.append(f'<line class="grid" x1="{x}" y1="{top}" x2="{x}" y2="{bottom}" stroke="#eeeeee"/>')
        out.append(f'<line x1="{x}" y1="{bottom}" x2="{x}" y2="{bottom + 5}" stroke="#333333"/>')
        out.append(
            f'<text x="{x}" y="{bottom + 20}" text-anchor="middle">{_iso_date(grid.bucket_start(k))}</text>'
        )
    out.append("</g>")

    out.append(
        f'<path class="axes" d="M{left},{top} L{left},{bottom} L{right},{bottom}" fill="none" stroke="#333333"/>'
    )
    out.append(
        f'<text class="x-label" x="{_num((left + right) / 2)}" y="{H - 20}" text-anchor="middle">'
        f"{escape(style.x_label)}</text>"
    )
    mid_y = _num((top + bottom) / 2)
    out.append(
        f'<text class="y-label" x="20" y="{mid_y}" text-anchor="middle" transform="rotate(-90 20 {mid_y})">'
        f"{escape(y_label)}</text>"
    )

    color = style.line_color.lower()
    out.append(f'<g class="series" data-name={quoteattr(series.name)}>')
    for run in _segments(values):
        points = " ".join(f"{_num(x_of(k))},{_num(y_of(v))}" for k, v in run)
        out.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2" '
            f'stroke-linejoin="round" stroke-linecap="round"/>'
        )
    for run in _segments(values):
        for k, v in run:
            out.append(f'<circle cx="{_num(x_of(k))}" cy="{_num(y_of(v))}" r="2.5" fill="{color}"/>')
    out.append("</g>")

    if not present:
        out.append(
            f'<text class="no-data" x="{_num((left + right) / 2)}" y="{_num((top + bottom) / 2)}" '
            f'text-anchor="middle" font-size="14" fill="#888888">no data</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_all(
    metrics_path: str | Path,
    style_path: str | Path | None,
    out_dir: str | Path,
) -> list[Path]:
    """Write ``<out_dir>/<series>.svg`` for every series; nothing is left behind on failure."""
    style = load_style(style_path)
    grid, series = read_metrics(metrics_path)
    for name in series:
        if not _SAFE_NAME.fullmatch(name):
            raise SchemaError(f"{metrics_path}: series name {name!r} is not a safe file name")
    out_dir = Path(out_dir)
    written: list[Path] = []
    try:
        for name, s in series.items():
            written.append(jsonio.atomic_write_text(out_dir / f"{name}.svg", render_series(s, grid, style)))
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return written
