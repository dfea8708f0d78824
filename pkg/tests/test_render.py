from __future__ import annotations

import json
import logging
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repo_pulse import render
from repo_pulse.errors import EmptySeries, StyleError
from repo_pulse.metrics import SERIES_NAMES, IntervalGrid, MetricSeries, write_metrics
from repo_pulse.render import ChartStyle, load_style, render_all, render_series, y_ticks

SVG = "{http://www.w3.org/2000/svg}"
GOLDEN = Path(__file__).parent / "fixtures" / "golden"
T0 = 1_609_718_400


def grid(n):
    return IntervalGrid(start=T0, bucket_width_days=30, bucket_count=n)


def polylines(svg: str) -> list[list[str]]:
    root = ET.fromstring(svg.encode())
    return [p.get("points").split() for p in root.iter(f"{SVG}polyline")]


def test_three_values_one_polyline():
    svg = render_series(MetricSeries("kloc", "KLOC", (1, 2, 3)), grid(3))
    lines = polylines(svg)
    assert len(lines) == 1 and len(lines[0]) == 3


def test_null_splits_the_line():
    svg = render_series(MetricSeries("kloc", "KLOC", (1, None, 3)), grid(3))
    assert [len(p) for p in polylines(svg)] == [1, 1]


def test_x_axis_shows_bucket_start_dates():
    svg = render_series(MetricSeries("kloc", "KLOC", (1, 2, 3)), grid(3))
    texts = [t.text for t in ET.fromstring(svg).iter(f"{SVG}text")]
    assert {"2021-01-04", "2021-02-03", "2021-03-05"} <= set(texts)


def test_empty_series_is_an_error():
    with pytest.raises(EmptySeries):
        render_series(MetricSeries("kloc", "KLOC", ()), grid(0))


def test_all_null_series_draws_axes_and_note(caplog):
    with caplog.at_level(logging.INFO, logger="repo_pulse.render"):
        svg = render_series(MetricSeries("issue_spoilage", "days", (None, None)), grid(2))
    root = ET.fromstring(svg)
    assert polylines(svg) == []
    assert any(t.text == "no data" for t in root.iter(f"{SVG}text"))
    assert "no defined values" in caplog.text


def test_style_is_applied():
    style = ChartStyle(width_px=640, height_px=300, line_color="#AA0000", grid=False, title="Size", y_label="k")
    svg = render_series(MetricSeries("kloc", "KLOC", (1, 2)), grid(2), style)
    root = ET.fromstring(svg)
    assert (root.get("width"), root.get("height")) == ("640", "300")
    assert all(p.get("stroke") == "#aa0000" for p in root.iter(f"{SVG}polyline"))
    assert not [e for e in root.iter(f"{SVG}line") if e.get("class") == "grid"]
    texts = [t.text for t in root.iter(f"{SVG}text")]
    assert "Size" in texts and "k" in texts


def test_text_is_escaped():
    svg = render_series(MetricSeries("kloc", "KLOC", (1,)), grid(1), ChartStyle(title="a < b & c"))
    assert any(t.text == "a < b & c" for t in ET.fromstring(svg).iter(f"{SVG}text"))


@pytest.mark.parametrize(
    "raw",
    [
        {"width_px": 0},
        {"width_px": "900"},
        {"height_px": 10},
        {"line_color": "red"},
        {"line_color": "#12345"},
        {"grid": "yes"},
        {"title": 3},
    ],
)
def test_invalid_style(raw):
    with pytest.raises(StyleError):
        ChartStyle(**raw)


def test_style_file_rejects_unknown_keys(tmp_path):
    path = tmp_path / "style.json"
    path.write_text(json.dumps({"width_px": 800, "colour": "#000000"}))
    with pytest.raises(StyleError, match="colour"):
        load_style(path)
    path.write_text(json.dumps({"width_px": 800, "font_family": "serif"}))
    assert load_style(path) == ChartStyle(width_px=800, font_family="serif")
    path.write_text("[1]")
    with pytest.raises(StyleError):
        load_style(path)


@pytest.mark.parametrize("lo, hi", [(0, 0.127), (-0.01, 0.095), (0, 1), (0, 73.5), (0, 0), (-5, -5), (0, 1e-7), (3, 1e9)])
def test_y_ticks_cover_range(lo, hi):
    ticks, axis_lo, axis_hi = y_ticks(lo, hi)
    assert len(ticks) >= 4
    assert axis_lo <= lo and axis_hi >= hi
    steps = {ticks[i + 1] - ticks[i] for i in range(len(ticks) - 1)}
    assert len(steps) == 1


values_strategy = st.lists(
    st.one_of(st.none(), st.floats(-1e6, 1e6, allow_nan=False), st.integers(0, 1000)), min_size=1, max_size=40
)


@settings(max_examples=150, deadline=None)
@given(values_strategy)
def test_every_chart_is_well_formed_and_counts_points(values):
    series = MetricSeries("productivity", "KLOC/interval", tuple(values))
    svg = render_series(series, grid(len(values)))
    assert svg == render_series(series, grid(len(values)))
    root = ET.fromstring(svg.encode())
    assert root.tag == f"{SVG}svg"
    points = sum(len(p) for p in polylines(svg))
    assert points == sum(v is not None for v in values)
    ys = [float(pt.split(",")[1]) for p in polylines(svg) for pt in p]
    assert all(render.MARGIN_TOP - 0.01 <= y <= 450 - render.MARGIN_BOTTOM + 0.01 for y in ys)


def _nine_series(n=4):
    return {name: MetricSeries(name, "u", tuple(float(i) for i in range(n))) for name in SERIES_NAMES}


def test_render_all_writes_one_file_per_series(tmp_path):
    path = write_metrics(tmp_path / "metrics.json", grid(4), _nine_series())
    style = tmp_path / "style.json"
    style.write_text(json.dumps({"width_px": 1234}))
    written = render_all(path, style, tmp_path / "charts")
    assert sorted(p.name for p in written) == sorted(f"{n}.svg" for n in SERIES_NAMES)
    for p in written:
        assert ET.parse(p).getroot().get("width") == "1234"


def test_render_all_cleans_up_on_failure(tmp_path, monkeypatch):
    path = write_metrics(tmp_path / "metrics.json", grid(4), _nine_series())
    real = render.render_series
    calls = []

    def flaky(series, g, style):
        calls.append(series.name)
        if len(calls) == 3:
            raise RuntimeError("disk on fire")
        return real(series, g, style)

    monkeypatch.setattr(render, "render_series", flaky)
    with pytest.raises(RuntimeError):
        render_all(path, None, tmp_path / "charts")
    assert list((tmp_path / "charts").iterdir()) == []


def test_golden_charts_are_byte_identical(tmp_path):
    written = render_all(GOLDEN / "metrics.json", None, tmp_path)
    assert len(written) == len(SERIES_NAMES)
    for path in written:
        assert path.read_bytes() == (GOLDEN / "charts" / path.name).read_bytes(), path.name
