"""Deterministic SVG 1.1 renderers for scatter plots, parallel coordinates
and raster heatmaps.

Output bytes depend only on the inputs: coordinates are printed with a fixed
number of decimals and elements are emitted in a fixed order.

Palette (Okabe-Ito, categorical)::

    #E69F00 #56B4E9 #009E73 #F0E442 #0072B2 #D55E00 #CC79A7 #000000

Sequential ramp (viridis stops): #440154 #3B528B #21918C #5EC962 #FDE725,
mapped min-to-max. Diverging ramp: #2166AC #F7F7F7 #B2182B, mapped
symmetrically about zero from -max|v| to +max|v|.
"""
from __future__ import annotations

import math
from typing import Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .core import RasterGrid
from .errors import EmptyInputError, ParameterError

PALETTE = ("#E69F00", "#56B4E9", "#009E73", "#F0E442", "#0072B2", "#D55E00", "#CC79A7", "#000000")
SEQUENTIAL = ("#440154", "#3B528B", "#21918C", "#5EC962", "#FDE725")
DIVERGING = ("#2166AC", "#F7F7F7", "#B2182B")
POOLED_COLOR = "#D62728"
NODATA_COLOR = "#CCCCCC"


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


class _Doc:
    def __init__(self, width: float, height: float, title: str | None = None):
        self.width, self.height = width, height
        self.parts: list[str] = []
        if title:
            self.parts.append(f"<title>{escape(title)}</title>")

    def el(self, tag: str, text: str | None = None, **attrs) -> None:
        a = "".join(f" {k.rstrip('_').replace('_', '-')}={quoteattr(str(v))}" for k, v in attrs.items() if v is not None)
        if text is None:
            self.parts.append(f"<{tag}{a}/>")
        else:
            self.parts.append(f"<{tag}{a}>{escape(text)}</{tag}>")

    def open(self, tag: str, **attrs) -> None:
        a = "".join(f" {k.rstrip('_').replace('_', '-')}={quoteattr(str(v))}" for k, v in attrs.items() if v is not None)
        self.parts.append(f"<{tag}{a}>")

    def close(self, tag: str) -> None:
        self.parts.append(f"</{tag}>")

    def bytes(self) -> bytes:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(self.width)}" '
            f'height="{_f(self.height)}" viewBox="0 0 {_f(self.width)} {_f(self.height)}">\n'
        )
        return (head + "\n".join(self.parts) + "\n</svg>\n").encode("utf-8")


def group_colors(labels: Sequence[str]) -> dict[str, str]:
    """Fixed palette assignment by sorted label."""
    return {g: PALETTE[i % len(PALETTE)] for i, g in enumerate(sorted(set(labels)))}


def ramp_color(t: float, stops: Sequence[str] = SEQUENTIAL) -> str:
    """Piecewise-linear interpolation between hex stops, ``t`` in [0, 1]."""
    t = min(1.0, max(0.0, float(t)))
    pos = t * (len(stops) - 1)
    i = min(int(math.floor(pos)), len(stops) - 2)
    u = pos - i
    a = [int(stops[i][k:k + 2], 16) for k in (1, 3, 5)]
    b = [int(stops[i + 1][k:k + 2], 16) for k in (1, 3, 5)]
    return "#" + "".join(f"{round(x + (y - x) * u):02X}" for x, y in zip(a, b))


def _scale(lo: float, hi: float, a: float, b: float):
    span = hi - lo
    if span == 0:
        return lambda v: (a + b) / 2
    return lambda v: a + (v - lo) / span * (b - a)


def render_scatter(
    xs,
    ys,
    groups: Sequence[str] | None = None,
    group_lines: Mapping[str, tuple[float, float]] | None = None,
    pooled_line: tuple[float, float] | None = None,
    title: str | None = None,
    xlabel: str = "x",
    ylabel: str = "y",
    size: tuple[int, int] = (480, 360),
) -> bytes:
    """Scatter plot with optional per-group and pooled ``(slope, intercept)`` lines.

    Each line spans the x-range of the points it summarizes.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size == 0:
        raise EmptyInputError("nothing to plot")
    if x.shape != y.shape:
        raise ParameterError("xs and ys differ in length")
    labels = list(groups) if groups is not None else ["all"] * x.size
    colors = group_colors(labels)
    W, H, m = size[0], size[1], 40
    lines = dict(group_lines or {})
    y_all = [y]
    for slope, icpt in list(lines.values()) + ([pooled_line] if pooled_line else []):
        y_all.append(np.array([slope * x.min() + icpt, slope * x.max() + icpt]))
    ycat = np.concatenate(y_all)
    sx = _scale(x.min(), x.max(), m, W - m / 2)
    sy = _scale(ycat.min(), ycat.max(), H - m, m / 2)
    doc = _Doc(W, H, title)
    doc.el("rect", class_="frame", x=_f(m), y=_f(m / 2), width=_f(W - 1.5 * m), height=_f(H - 1.5 * m),
           fill="none", stroke="#444444")
    doc.el("text", xlabel, class_="label", x=_f(W / 2), y=_f(H - 8), text_anchor="middle", font_size="12")
    doc.el("text", ylabel, class_="label", x="12", y=_f(H / 2), text_anchor="middle", font_size="12",
           transform=f"rotate(-90 12 {_f(H / 2)})")
    doc.open("g", class_="points")
    for xi, yi, g in zip(x, y, labels):
        doc.el("circle", class_="point", cx=_f(sx(xi)), cy=_f(sy(yi)), r="2.50", fill=colors[g], fill_opacity="0.75")
    doc.close("g")
    lab = np.array(labels, dtype=object)
    for g in sorted(lines):
        slope, icpt = lines[g]
        sel = x[lab == g] if (lab == g).any() else x
        x0, x1 = sel.min(), sel.max()
        doc.el("line", class_="fit-group", x1=_f(sx(x0)), y1=_f(sy(slope * x0 + icpt)), x2=_f(sx(x1)),
               y2=_f(sy(slope * x1 + icpt)), stroke=colors.get(g, "#000000"), stroke_width="2",
               stroke_dasharray="6 3")
    if pooled_line is not None:
        slope, icpt = pooled_line
        x0, x1 = x.min(), x.max()
        doc.el("line", class_="fit-pooled", x1=_f(sx(x0)), y1=_f(sy(slope * x0 + icpt)), x2=_f(sx(x1)),
               y2=_f(sy(slope * x1 + icpt)), stroke=POOLED_COLOR, stroke_width="2.5", stroke_dasharray="8 4")
    return doc.bytes()


def render_parallel_coords(table, title: str | None = None, size: tuple[int, int] = (560, 360)) -> bytes:
    """One polyline per record across one vertical axis per column.

    ``table`` is a :class:`~endobias.simpson.ParallelCoordsTable`; values are
    placed by their per-axis min and max.
    """
    vals = np.asarray(table.values, dtype=float)
    if vals.size == 0 or vals.shape[0] == 0:
        raise EmptyInputError("empty table")
    k = vals.shape[1]
    if k < 2:
        raise ParameterError("need at least two axes")
    W, H, m = size[0], size[1], 40
    labels = list(table.groups) if table.groups is not None else ["all"] * vals.shape[0]
    colors = group_colors(labels)
    ax_x = [m + i * (W - 2 * m) / (k - 1) for i in range(k)]
    scales = [_scale(vals[:, i].min(), vals[:, i].max(), H - m, m) for i in range(k)]
    doc = _Doc(W, H, title)
    doc.open("g", class_="records")
    for r in range(vals.shape[0]):
        pts = " ".join(f"{_f(ax_x[i])},{_f(scales[i](vals[r, i]))}" for i in range(k))
        doc.el("polyline", class_="record", points=pts, fill="none", stroke=colors[labels[r]],
               stroke_opacity="0.5", stroke_width="1")
    doc.close("g")
    doc.open("g", class_="axes")
    for i, name in enumerate(table.axes):
        doc.el("line", class_="axis", x1=_f(ax_x[i]), y1=_f(m), x2=_f(ax_x[i]), y2=_f(H - m), stroke="#222222")
        doc.el("text", str(name), class_="label", x=_f(ax_x[i]), y=_f(H - m / 3), text_anchor="middle",
               font_size="12")
    doc.close("g")
    doc.open("g", class_="legend")
    for j, g in enumerate(sorted(colors)):
        doc.el("rect", class_="swatch", x=_f(W - m - 60), y=_f(8 + 14 * j), width="10", height="10", fill=colors[g])
        doc.el("text", g, class_="label", x=_f(W - m - 46), y=_f(17 + 14 * j), font_size="10")
    doc.close("g")
    return doc.bytes()


def render_heatmap(
    r: RasterGrid,
    ramp: str = "sequential",
    flagged: Sequence[tuple[int, int]] = (),
    quiver=None,
    zones=None,
    markers: Sequence[tuple[float, float]] = (),
    title: str | None = None,
    max_px: int = 480,
    quiver_stride: int | None = None,
) -> bytes:
    """Cell rects colored by min-max position on ``ramp``; same-color row runs merge.

    Overlays, each in its own group: ``flagged`` (row, col) cells outlined,
    ``quiver`` a :class:`~endobias.kde.VectorField` drawn as arrows, ``zones``
    a :class:`~endobias.maup.ZonePartition` drawn as boundaries, ``markers``
    map coordinates drawn as rings. Row 0 is drawn at the bottom.
    """
    if r.valid.sum() == 0:
        raise EmptyInputError("grid has no valid cells")
    if ramp not in ("sequential", "diverging"):
        raise ParameterError(f"unknown ramp {ramp!r}")
    h, w = r.spec.shape
    px = max(1.0, min(24.0, max_px / max(w, h)))
    W, H = w * px, h * px
    vals = r.valid_values()
    if ramp == "sequential":
        lo, hi, stops = float(vals.min()), float(vals.max()), SEQUENTIAL
    else:
        m = float(np.abs(vals).max())
        lo, hi, stops = -m, m, DIVERGING

    def t_of(v):
        return 0.5 if hi == lo else (v - lo) / (hi - lo)

    def top(row):
        return (h - 1 - row) * px

    doc = _Doc(W, H, title)
    doc.open("g", class_="cells", shape_rendering="crispEdges")
    for row in range(h):
        fills = [NODATA_COLOR if r.nodata[row, col] else ramp_color(t_of(r.values[row, col]), stops)
                 for col in range(w)]
        col = 0
        # horizontal runs of one color collapse into one rect
        while col < w:
            end = col + 1
            while end < w and fills[end] == fills[col] and r.nodata[row, end] == r.nodata[row, col]:
                end += 1
            cls = "nodata" if r.nodata[row, col] else "cell"
            doc.el("rect", class_=cls, x=_f(col * px), y=_f(top(row)), width=_f((end - col) * px), height=_f(px),
                   fill=fills[col])
            col = end
    doc.close("g")
    if zones is not None:
        z = zones.zone_of
        segs = []
        for row in range(h):
            for col in range(w):
                if col + 1 < w and z[row, col] != z[row, col + 1]:
                    xx = (col + 1) * px
                    segs.append(f"M{_f(xx)} {_f(top(row))}V{_f(top(row) + px)}")
                if row + 1 < h and z[row, col] != z[row + 1, col]:
                    yy = top(row)
                    segs.append(f"M{_f(col * px)} {_f(yy)}H{_f((col + 1) * px)}")
        doc.open("g", class_="zones")
        if segs:
            doc.el("path", class_="zone-boundary", d="".join(segs), fill="none", stroke="#FFFFFF", stroke_width="1")
        doc.close("g")
    if flagged:
        doc.open("g", class_="flagged")
        for row, col in sorted(flagged):
            doc.el("rect", class_="flag", x=_f(col * px), y=_f(top(row)), width=_f(px), height=_f(px),
                   fill="none", stroke="#FF0000", stroke_width="1.5")
        doc.close("g")
    if quiver is not None:
        mag = np.hypot(quiver.gx, quiver.gy)
        stride = quiver_stride or max(1, int(math.ceil(max(w, h) / 24)))
        mmax = float(mag.max())
        doc.open("defs")
        doc.open("marker", id="arrowhead", markerWidth="6", markerHeight="6", refX="5", refY="3", orient="auto")
        doc.el("path", d="M0,0 L6,3 L0,6 z", fill="#FFFFFF")
        doc.close("marker")
        doc.close("defs")
        doc.open("g", class_="quiver")
        if mmax > 0:
            for row in range(stride // 2, h, stride):
                for col in range(stride // 2, w, stride):
                    if mag[row, col] == 0:
                        continue
                    length = 0.9 * stride * px * mag[row, col] / mmax
                    ux, uy = quiver.gx[row, col] / mag[row, col], quiver.gy[row, col] / mag[row, col]
                    cx, cy = (col + 0.5) * px, top(row) + 0.5 * px
                    # screen y points down
                    doc.el("line", class_="arrow", x1=_f(cx), y1=_f(cy), x2=_f(cx + ux * length),
                           y2=_f(cy - uy * length), stroke="#FFFFFF", stroke_width="1",
                           marker_end="url(#arrowhead)")
        doc.close("g")
    if markers:
        doc.open("g", class_="markers")
        for mx, my in markers:
            cx = (mx - r.spec.origin_x) / r.spec.cell_size * px
            cy = H - (my - r.spec.origin_y) / r.spec.cell_size * px
            doc.el("circle", class_="marker", cx=_f(cx), cy=_f(cy), r=_f(max(3.0, px)), fill="none",
                   stroke="#FF00FF", stroke_width="2")
        doc.close("g")
    return doc.bytes()
