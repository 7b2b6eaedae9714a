"""SVG rendering of critical-difference reports."""

import math
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from flowaug import RunResult, build_report, render_cd_chart, save_cd_chart
from flowaug.cdchart import MARGIN, WIDTH, rank_to_x
from flowaug.rng import RngStream

SVG_NS = "{http://www.w3.org/2000/svg}"


def demo_report(s=6, names=("noaug", "flip", "wrap")):
    k = len(names)
    scores = np.tile(np.linspace(0.9, 0.9 - 0.1 * (k - 1), k), (s, 1))
    scores += np.arange(s)[:, None] * 1e-4
    return build_report(RunResult(tuple(names), tuple(range(s)), scores))


def test_rank_to_x_endpoints_and_midpoint():
    assert rank_to_x(1.0, 5) == MARGIN
    assert rank_to_x(5.0, 5) == WIDTH - MARGIN
    assert rank_to_x(3.0, 5) == pytest.approx((WIDTH) / 2.0)
    with pytest.raises(ValueError):
        rank_to_x(1.0, 1)


def test_chart_is_valid_xml_with_one_label_per_method():
    report = demo_report()
    svg = render_cd_chart(report)
    root = ET.fromstring(svg)
    assert root.tag == f"{SVG_NS}svg"
    labels = [el.text for el in root.iter(f"{SVG_NS}text") if el.get("class") == "method"]
    assert len(labels) == len(report.methods)
    for name, rank in zip(report.methods, report.avg_ranks):
        assert f"{name} ({rank:.2f})" in labels


def test_chart_byte_deterministic():
    a = render_cd_chart(demo_report())
    b = render_cd_chart(demo_report())
    assert a == b
    assert a.startswith('<?xml version="1.0" encoding="UTF-8"?>')


def test_chart_has_one_bar_per_group_with_correct_extent():
    report = demo_report()  # groups: (noaug, flip), (flip, wrap)
    assert len(report.groups) == 2
    root = ET.fromstring(render_cd_chart(report))
    bars = [el for el in root.iter(f"{SVG_NS}line") if el.get("class") == "group-bar"]
    assert len(bars) == len(report.groups)
    k = len(report.methods)
    rank_of = dict(zip(report.methods, report.avg_ranks))
    for bar, group in zip(bars, report.groups):
        lo = rank_to_x(min(rank_of[m] for m in group), k)
        hi = rank_to_x(max(rank_of[m] for m in group), k)
        assert float(bar.get("x1")) == pytest.approx(lo - 3, abs=0.01)
        assert float(bar.get("x2")) == pytest.approx(hi + 3, abs=0.01)
        assert bar.get("y1") == bar.get("y2")


def test_chart_cd_ruler_span_matches_cd():
    report = demo_report()
    root = ET.fromstring(render_cd_chart(report))
    ruler = next(el for el in root.iter(f"{SVG_NS}line") if el.get("class") == "cd-ruler")
    k = len(report.methods)
    expected = rank_to_x(1.0 + report.cd, k) - rank_to_x(1.0, k)
    assert float(ruler.get("x2")) - float(ruler.get("x1")) == pytest.approx(expected, abs=0.01)
    text = render_cd_chart(report)
    assert f"CD = {report.cd:.3f}" in text


def test_chart_escapes_method_names():
    report = demo_report(names=("a<b", "c&d", "plain"))
    svg = render_cd_chart(report)
    assert "a&lt;b" in svg and "c&amp;d" in svg
    ET.fromstring(svg)  # still parses


def test_chart_axis_ticks_cover_integer_ranks():
    report = demo_report(names=("m1", "m2", "m3", "m4", "m5"))
    root = ET.fromstring(render_cd_chart(report))
    tick_labels = [
        el.text for el in root.iter(f"{SVG_NS}text")
        if el.text and re.fullmatch(r"\d+", el.text)
    ]
    assert tick_labels == [str(r) for r in range(1, 6)]


def test_save_cd_chart_round_trip(tmp_path):
    report = demo_report()
    path = tmp_path / "chart.svg"
    save_cd_chart(report, path)
    assert path.read_text() == render_cd_chart(report)
    assert path.read_bytes().endswith(b"</svg>\n")


def test_chart_height_grows_with_methods():
    small = ET.fromstring(render_cd_chart(demo_report(names=("a", "b"))))
    big = ET.fromstring(
        render_cd_chart(demo_report(names=tuple(f"m{i}" for i in range(8))))
    )
    assert int(big.get("height")) > int(small.get("height"))
    assert small.get("width") == big.get("width") == str(WIDTH)
