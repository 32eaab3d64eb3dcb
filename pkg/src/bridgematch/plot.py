"""Schematic SVG rendering of scatter plots, trajectories and curves."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
GREY = "#999999"


@dataclass
class Figure:
    width: int = 480
    height: int = 480
    margin: int = 48
    title: str = ""
    xlabel: str = "x"
    ylabel: str = "y"
    marks: list = field(default_factory=list)
    xs: list = field(default_factory=list)
    ys: list = field(default_factory=list)

    def scatter(self, x, y, colors, radius=1.6, opacity=0.6):
        x, y = np.asarray(x, float), np.asarray(y, float)
        self.marks.append(("scatter", x, y, list(colors), radius, opacity))
        self.xs.append(x)
        self.ys.append(y)

    def line(self, x, y, color, width=1.0, opacity=0.8):
        x, y = np.asarray(x, float), np.asarray(y, float)
        self.marks.append(("line", x, y, color, width, opacity))
        self.xs.append(x)
        self.ys.append(y)

    def _limits(self, arrays):
        vals = np.concatenate([a.ravel() for a in arrays]) if arrays else np.zeros(0)
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            return 0.0, 1.0
        lo, hi = float(vals.min()), float(vals.max())
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        return lo - pad, hi + pad

    def to_svg(self) -> str:
        x_lo, x_hi = self._limits(self.xs)
        y_lo, y_hi = self._limits(self.ys)
        m, w, h = self.margin, self.width, self.height

        def px(x):
            return m + (x - x_lo) / (x_hi - x_lo) * (w - 2 * m)

        def py(y):
            return h - m - (y - y_lo) / (y_hi - y_lo) * (h - 2 * m)

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
            f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
            f'<g id="axes" stroke="black" stroke-width="1">'
            f'<line x1="{m}" y1="{h - m}" x2="{w - m}" y2="{h - m}"/>'
            f'<line x1="{m}" y1="{m}" x2="{m}" y2="{h - m}"/></g>',
        ]
        ticks = ['<g id="ticks" font-family="sans-serif" font-size="10" fill="black">']
        for v in np.linspace(x_lo, x_hi, 5):
            ticks.append(f'<text x="{px(v):.1f}" y="{h - m + 14}" text-anchor="middle">{v:.2g}</text>')
        for v in np.linspace(y_lo, y_hi, 5):
            ticks.append(f'<text x="{m - 6}" y="{py(v) + 3:.1f}" text-anchor="end">{v:.2g}</text>')
        ticks.append("</g>")
        out.extend(ticks)
        out.append(f'<text x="{w / 2}" y="{h - 10}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="12">{escape(self.xlabel)}</text>')
        out.append(f'<text x="14" y="{h / 2}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="12" transform="rotate(-90 14 {h / 2})">{escape(self.ylabel)}</text>')
        if self.title:
            out.append(f'<text x="{w / 2}" y="20" text-anchor="middle" font-family="sans-serif" '
                       f'font-size="14">{escape(self.title)}</text>')
        out.append('<g id="marks">')
        for kind, x, y, color, size, opacity in self.marks:
            if kind == "line" and len(x) > 1:
                pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
                out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                           f'stroke-width="{size}" stroke-opacity="{opacity}"/>')
            elif kind == "scatter":
                for a, b, c in zip(x, y, color):
                    out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="{size}" '
                               f'fill="{c}" fill-opacity="{opacity}"/>')
        out.append("</g></svg>")
        return "\n".join(out) + "\n"


def component_colors(labels) -> list[str]:
    return [PALETTE[int(k) % len(PALETTE)] for k in labels]
