"""Minimal self-contained SVG line charts.

Output is a pure function of the input: fixed number formatting, no
timestamps, no random ids.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET

from .episodes import EvalReport
from ._io import atomic_write
from .simulation import BiasCurve

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=40, bottom=55)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo, hi, n=5):
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _range(values):
    lo, hi = min(values), max(values)
    if hi == lo:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    return lo, hi


def line_chart(series, title="", xlabel="", ylabel="", comments=()) -> str:
    """Render ``series`` (list of ``(label, xs, ys)``) to an SVG string.

    Each series becomes a polyline plus one circle marker per point.
    ``comments`` lines are embedded as XML comments.
    """
    points = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)
              if math.isfinite(x) and math.isfinite(y)]
    if not points:
        raise ValueError("nothing to plot")
    x0, x1 = _range([p[0] for p in points])
    y0, y1 = _range([p[1] for p in points])
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + (1.0 - (y - y0) / (y1 - y0)) * ph

    root = ET.Element("svg", xmlns="http://www.w3.org/2000/svg",
                      width=str(WIDTH), height=str(HEIGHT),
                      viewBox=f"0 0 {WIDTH} {HEIGHT}")
    for line in comments:
        root.append(ET.Comment(f" {line} "))
    ET.SubElement(root, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="white")
    if title:
        t = ET.SubElement(root, "text", x=_fmt(WIDTH / 2), y="22", attrib={"text-anchor": "middle"})
        t.text = title

    axes = ET.SubElement(root, "g", stroke="black", attrib={"stroke-width": "1"})
    bottom, left = HEIGHT - MARGIN["bottom"], MARGIN["left"]
    ET.SubElement(axes, "line", x1=str(left), y1=str(bottom), x2=str(WIDTH - MARGIN["right"]), y2=str(bottom))
    ET.SubElement(axes, "line", x1=str(left), y1=str(MARGIN["top"]), x2=str(left), y2=str(bottom))

    labels = ET.SubElement(root, "g", attrib={"font-size": "11", "font-family": "sans-serif"})
    for tx in _ticks(x0, x1):
        el = ET.SubElement(labels, "text", x=_fmt(sx(tx)), y=str(bottom + 16), attrib={"text-anchor": "middle"})
        el.text = f"{tx:.3g}"
    for ty in _ticks(y0, y1):
        el = ET.SubElement(labels, "text", x=str(left - 6), y=_fmt(sy(ty) + 4), attrib={"text-anchor": "end"})
        el.text = f"{ty:.3g}"
    xl = ET.SubElement(root, "text", x=_fmt(MARGIN["left"] + pw / 2), y=str(HEIGHT - 12),
                       attrib={"text-anchor": "middle", "class": "xlabel"})
    xl.text = xlabel
    yl = ET.SubElement(root, "text", x="16", y=_fmt(MARGIN["top"] + ph / 2),
                       transform=f"rotate(-90 16 {_fmt(MARGIN['top'] + ph / 2)})",
                       attrib={"text-anchor": "middle", "class": "ylabel"})
    yl.text = ylabel

    for i, (label, xs, ys) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = [(sx(x), sy(y)) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        g = ET.SubElement(root, "g", attrib={"class": "series", "data-label": str(label)})
        if len(pts) > 1:
            ET.SubElement(g, "polyline", fill="none", stroke=color,
                          points=" ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in pts))
        for px, py in pts:
            ET.SubElement(g, "circle", cx=_fmt(px), cy=_fmt(py), r="3", fill=color)
        if len(series) > 1:
            el = ET.SubElement(root, "text", x=str(WIDTH - MARGIN["right"] - 4),
                               y=str(MARGIN["top"] + 14 * (i + 1)), fill=color,
                               attrib={"text-anchor": "end", "font-size": "11"})
            el.text = str(label)

    return ET.tostring(root, encoding="unicode", xml_declaration=False) + "\n"


def _series_for(obj):
    if isinstance(obj, BiasCurve):
        ok = obj.count > 0
        return ([("accuracy", obj.bin_centers[ok].tolist(), obj.mean_acc[ok].tolist())],
                "mean distance of prototypes to centroid", "mean accuracy")
    if isinstance(obj, EvalReport):
        return ([("accuracy", list(obj.episode_ids), list(obj.per_episode_acc))],
                "episode", "accuracy")
    items = list(obj)
    if items and isinstance(items[0][1], BiasCurve):
        # (axis value, curve) pairs from a simulation sweep
        out = []
        for value, curve in items:
            ok = curve.count > 0
            out.append((str(value), curve.bin_centers[ok].tolist(), curve.mean_acc[ok].tolist()))
        return out, "mean distance of prototypes to centroid", "mean accuracy"
    if items and isinstance(items[0][1], EvalReport):
        # (k, report) pairs from a neighbor-count sweep
        xs = [float(k) for k, _ in items]
        ys = [r.mean_acc for _, r in items]
        return [("mean accuracy", xs, ys)], "number of base neighbors k", "mean accuracy"
    xs, ys = zip(*items)
    return [("series", list(map(float, xs)), list(map(float, ys)))], "x", "y"


def emit_plot(obj, path, title="", comments=()) -> None:
    """Write ``obj`` as an SVG line chart.

    ``obj`` may be a :class:`BiasCurve`, an :class:`EvalReport`, a list of
    ``(value, BiasCurve)`` or ``(k, EvalReport)`` pairs, or ``(x, y)`` pairs.
    """
    series, xlabel, ylabel = _series_for(obj)
    svg = line_chart(series, title, xlabel, ylabel, comments)
    atomic_write(path, svg.encode("utf-8"))

