import xml.etree.ElementTree as ET

import pytest

from billiard_security.services.beams import focus_chain
from billiard_security.services.paths import segment
from billiard_security.services.plotting import Layout, SvgRenderer, render_svg
from billiard_security.services.ray import PolygonalPath

SVG = "{http://www.w3.org/2000/svg}"


def elements(svg, tag, css_class=None):
    root = ET.fromstring(svg.split("?>", 1)[-1].strip())
    return [e for e in root.iter(SVG + tag) if css_class is None or e.get("class") == css_class]


def test_screen_mapping(unit_circle):
    renderer = SvgRenderer(unit_circle)
    assert renderer.to_screen((0.0, 0.0)) == pytest.approx((320.0, 320.0))
    x, y = renderer.to_screen((0.0, 1.0))
    assert x == pytest.approx(320.0)
    assert y == pytest.approx(32.0)


def test_document_structure(unit_circle):
    center = (0.0, 0.0)
    paths = [PolygonalPath.on_table(unit_circle, center, (0.3, 0.0), [0.25]), segment(center, (0.3, 0.0))]
    svg = render_svg(unit_circle, paths, center, (0.3, 0.0))
    assert svg.startswith("<?xml")
    assert svg.rstrip().endswith("</svg>")
    assert len(elements(svg, "path", "table")) == 1
    drawn = elements(svg, "path", "billiard-path")
    assert [e.get("id") for e in drawn] == ["path-0", "path-1"]
    assert len(elements(svg, "circle", "vertex")) == 1
    endpoints = elements(svg, "circle", "endpoint")
    assert len(endpoints) == 2
    assert float(endpoints[0].get("cx")) == pytest.approx(320.0)
    assert float(endpoints[0].get("cy")) == pytest.approx(320.0)


def test_rendering_is_deterministic(ellipse_21):
    path = PolygonalPath.on_table(ellipse_21, (-1.0, 0.0), (1.0, 0.0), [0.25])
    assert render_svg(ellipse_21, [path], (-1.0, 0.0), (1.0, 0.0)) == render_svg(
        ellipse_21, [path], (-1.0, 0.0), (1.0, 0.0))


def test_focus_labels(unit_circle):
    path = PolygonalPath.on_table(unit_circle, (0.0, 0.0), (0.0, 0.0), [0.0])
    svg = render_svg(unit_circle, [path], chains=[focus_chain(unit_circle, path)])
    labels = elements(svg, "text", "focus")
    assert len(labels) == 1
    assert labels[0].text in ("f=0.000000", "f=-0.000000")


def test_custom_layout(unit_circle):
    svg = render_svg(unit_circle, layout=Layout(width=200, height=100, margin=10.0))
    root = ET.fromstring(svg.split("?>", 1)[-1].strip())
    assert root.get("width") == "200"
    assert root.get("height") == "100"
    assert root.get("viewBox") == "0 0 200 100"
