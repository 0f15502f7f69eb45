import xml.etree.ElementTree as ET

import pytest

from edgehealth import plots

NS = "{http://www.w3.org/2000/svg}"


def marks(svg):
    root = ET.fromstring(svg.encode())
    return [el for el in root.iter() if el.get("class") == "mark"]


def test_color_endpoints():
    assert plots.color_for(0.0) == "#1f77b4"
    assert plots.color_for(1.0) == "#d62728"
    assert plots.color_for(2.0) == "#d62728"
    mid = plots.color_for(0.5)
    assert mid == "#7a4f6e"  # 122.5 rounds half-to-even


def test_bar_chart_marks():
    svg = plots.bar_chart("t", ["a", "b", "c"], [3, 1, 0], "count")
    root = ET.fromstring(svg.encode())
    assert root.get("viewBox") == "0 0 800 600"
    assert len(marks(svg)) == 3


def test_beeswarm_marks_and_determinism():
    rows = [("a", 0.1, 0.0), ("b", -0.2, 1.0), ("a", 0.3, 0.5)]
    svg = plots.beeswarm("t", ["a", "b"], rows, seed=3)
    assert len(marks(svg)) == 3
    assert svg == plots.beeswarm("t", ["a", "b"], rows, seed=3)


@pytest.mark.parametrize("n", [0, 1, 7])
def test_scatter_marks(n):
    pts = [(i, i * 0.1, 5.0) for i in range(n)]
    assert len(marks(plots.scatter("t & <x>", pts, "x", "y", "c"))) == n
