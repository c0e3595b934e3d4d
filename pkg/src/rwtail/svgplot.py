"""Static SVG rendering of the level-set geometry and convergence domain.

Hand-rolled SVG so the output is a deterministic function of the inputs:
no timestamps, no library version strings, fixed float formatting.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

import numpy as np

from .asymptotics import DirectionRate, DomainDescription
from .geometry import GeometrySummary, boundary_points, section_roots

_W, _H = 640, 560
_MARGIN = 56


def _fmt(x: float) -> str:
    return f"{x:.3f}"


class _Canvas:
    def __init__(self, xlim: tuple[float, float], ylim: tuple[float, float]) -> None:
        self.xlim = xlim
        self.ylim = ylim
        self.parts: list[str] = []

    def to_px(self, x: float, y: float) -> tuple[float, float]:
        fx = (x - self.xlim[0]) / (self.xlim[1] - self.xlim[0])
        fy = (y - self.ylim[0]) / (self.ylim[1] - self.ylim[0])
        return (_MARGIN + fx * (_W - 2 * _MARGIN), _H - _MARGIN - fy * (_H - 2 * _MARGIN))

    def polyline(self, pts: Iterable[tuple[float, float]], color: str, width: float = 1.5, dash: str = "") -> None:
        coords = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in (self.to_px(x, y) for x, y in pts))
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{d} points="{coords}"/>'
        )

    def polygon(self, pts: Sequence[tuple[float, float]], fill: str, opacity: float) -> None:
        coords = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in (self.to_px(x, y) for x, y in pts))
        self.parts.append(f'<polygon fill="{fill}" fill-opacity="{opacity}" stroke="none" points="{coords}"/>')

    def line(self, a: tuple[float, float], b: tuple[float, float], color: str, width: float = 1.0, dash: str = "") -> None:
        self.polyline([a, b], color, width, dash)

    def dot(self, x: float, y: float, color: str, r: float = 3.0) -> None:
        px, py = self.to_px(x, y)
        self.parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="{r}" fill="{color}"/>')

    def text(self, x: float, y: float, s: str, color: str = "#222", dx: float = 5, dy: float = -5) -> None:
        px, py = self.to_px(x, y)
        self.parts.append(
            f'<text x="{_fmt(px + dx)}" y="{_fmt(py + dy)}" font-size="11" '
            f'font-family="monospace" fill="{color}">{s}</text>'
        )

    def render(self, title: str) -> str:
        header = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}">\n<rect width="{_W}" height="{_H}" fill="white"/>\n'
            f'<text x="{_MARGIN}" y="24" font-size="13" font-family="monospace" fill="#222">{title}</text>\n'
        )
        return header + "\n".join(self.parts) + "\n</svg>\n"


def _face_curve(surface, xlim, ylim, n=241) -> list[list[tuple[float, float]]]:
    """Level-1 curve of a face MGF, as segments clipped to the view window.

    Face level sets can be unbounded, so the curve is sampled per vertical
    section and split wherever a branch leaves the window or disappears.
    """
    xs = np.linspace(xlim[0], xlim[1], n)
    segments: list[list[tuple[float, float]]] = []
    upper: list[tuple[float, float]] = []
    lower: list[tuple[float, float]] = []
    for x in xs:
        roots = section_roots(surface, 2, float(x))
        for store, val in ((upper, roots[1] if roots else None), (lower, roots[0] if roots else None)):
            if val is None or not math.isfinite(val) or not (ylim[0] <= val <= ylim[1]):
                if len(store) > 1:
                    segments.append(list(store))
                store.clear()
            else:
                store.append((float(x), float(val)))
    for store in (upper, lower):
        if len(store) > 1:
            segments.append(list(store))
    return segments


def render_geometry_svg(
    g: GeometrySummary,
    domain: Optional[DomainDescription] = None,
    rates: Sequence[DirectionRate] = (),
    title: str = "level sets and convergence domain",
) -> str:
    curve = boundary_points(g.gamma, 384)
    xmax = float(curve[:, 0].max())
    ymax = float(curve[:, 1].max())
    xmin = float(curve[:, 0].min())
    ymin = float(curve[:, 1].min())
    span = max(xmax - xmin, ymax - ymin)
    pad = 0.25 * span
    xlim = (xmin - pad, xmax + pad)
    ylim = (ymin - pad, ymax + pad)
    cv = _Canvas(xlim, ylim)

    cv.line((xlim[0], 0.0), (xlim[1], 0.0), "#999", 1.0)
    cv.line((0.0, ylim[0]), (0.0, ylim[1]), "#999", 1.0)

    if domain is not None:
        tau = domain.tau.tau
        arc = [p for p in domain.boundary_sample(160)]
        poly = [(max(xlim[0], min(p[0], xlim[1])), max(ylim[0], min(p[1], ylim[1]))) for p in arc]
        poly = [(min(tau[0], xlim[1]), ylim[0])] + poly + [(xlim[0], min(tau[1], ylim[1])), (xlim[0], ylim[0])]
        cv.polygon(poly, "#7fb2d9", 0.25)
        cv.line((tau[0], ylim[0]), (tau[0], ylim[1]), "#2b6ca3", 1.0, dash="6,3")
        cv.line((xlim[0], tau[1]), (xlim[1], tau[1]), "#2b6ca3", 1.0, dash="6,3")
        cv.text(tau[0], ylim[1] - 0.05 * span, "tau1", "#2b6ca3")
        cv.text(xlim[1] - 0.18 * span, tau[1], "tau2", "#2b6ca3")

    cv.polyline([(float(a), float(b)) for a, b in curve], "#d1342f", 2.0)
    for face, color in ((g.gamma1, "#2e8540"), (g.gamma2, "#8a4fb0")):
        for seg in _face_curve(face, xlim, ylim):
            cv.polyline(seg, color, 1.4, dash="2,3")

    labels = {"theta_max": "max", "theta_e": "e", "theta_c": "c"}
    for attr, tag in labels.items():
        pts = getattr(g.extreme, attr)
        for k in (1, 2):
            p = pts[k]
            if p is None:
                continue
            cv.dot(p[0], p[1], "#222", 2.5)
            cv.text(p[0], p[1], f"{tag}{k}")

    for rate in rates:
        tip = (rate.alpha * rate.c[0], rate.alpha * rate.c[1])
        cv.line((0.0, 0.0), tip, "#b36b00", 1.4)
        cv.dot(tip[0], tip[1], "#b36b00", 3.0)
        cv.text(tip[0], tip[1], f"alpha={rate.alpha:.4f}", "#b36b00")

    return cv.render(title)


def write_svg(path: str, svg_text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(svg_text)
