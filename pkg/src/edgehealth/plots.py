"""Dependency-free SVG charts with one ``class="mark"`` element per data row."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 600
LOW_COLOR = (0x1F, 0x77, 0xB4)
HIGH_COLOR = (0xD6, 0x27, 0x28)
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 170, 30, 50, 60


def color_for(t: float) -> str:
    """Linear blue-to-red interpolation for ``t`` in [0, 1]."""
    t = min(max(float(t), 0.0), 1.0)
    r, g, b = (round(lo + (hi - lo) * t) for lo, hi in zip(LOW_COLOR, HIGH_COLOR))
    return f"#{r:02x}{g:02x}{b:02x}"


def _f(v: float) -> str:
    return f"{v:.2f}"


def _open(title: str) -> list:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2}" y="28" text-anchor="middle" font-family="sans-serif" font-size="18">{escape(title)}</text>',
    ]


def _close(parts: list) -> str:
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


class _Scale:
    def __init__(self, lo: float, hi: float, out_lo: float, out_hi: float):
        if not hi > lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.lo, self.hi, self.out_lo, self.out_hi = lo, hi, out_lo, out_hi

    def __call__(self, v: float) -> float:
        return self.out_lo + (v - self.lo) / (self.hi - self.lo) * (self.out_hi - self.out_lo)


def _x_axis(parts: list, scale: _Scale, label: str) -> None:
    y = HEIGHT - MARGIN_BOTTOM
    parts.append(f'<line x1="{MARGIN_LEFT}" y1="{y}" x2="{WIDTH - MARGIN_RIGHT}" y2="{y}" stroke="#333"/>')
    for v in np.linspace(scale.lo, scale.hi, 5):
        x = scale(v)
        parts.append(f'<line x1="{_f(x)}" y1="{y}" x2="{_f(x)}" y2="{y + 5}" stroke="#333"/>')
        parts.append(
            f'<text x="{_f(x)}" y="{y + 20}" text-anchor="middle" font-family="sans-serif" font-size="11">{v:.3g}</text>'
        )
    parts.append(
        f'<text x="{(MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2}" y="{HEIGHT - 15}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{escape(label)}</text>'
    )


def _y_axis(parts: list, scale: _Scale, label: str) -> None:
    x = MARGIN_LEFT
    parts.append(f'<line x1="{x}" y1="{MARGIN_TOP}" x2="{x}" y2="{HEIGHT - MARGIN_BOTTOM}" stroke="#333"/>')
    for v in np.linspace(scale.lo, scale.hi, 5):
        y = scale(v)
        parts.append(
            f'<text x="{x - 8}" y="{_f(y + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3g}</text>'
        )
    parts.append(
        f'<text x="20" y="{HEIGHT / 2}" transform="rotate(-90 20 {HEIGHT / 2})" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{escape(label)}</text>'
    )


def _legend(parts: list, label: str) -> None:
    x0, y0 = WIDTH - MARGIN_RIGHT - 150, 38
    for k in range(10):
        parts.append(f'<rect x="{x0 + 12 * k}" y="{y0}" width="12" height="8" fill="{color_for(k / 9)}"/>')
    parts.append(f'<text x="{x0 - 4}" y="{y0 + 8}" text-anchor="end" font-family="sans-serif" font-size="10">low</text>')
    parts.append(f'<text x="{x0 + 124}" y="{y0 + 8}" font-family="sans-serif" font-size="10">high {escape(label)}</text>')


def bar_chart(title: str, labels: Sequence[str], values: Sequence[float], value_label: str) -> str:
    """Horizontal bars, first label at the top."""
    parts = _open(title)
    hi = max([float(v) for v in values] + [0.0])
    xs = _Scale(0.0, hi if hi > 0 else 1.0, MARGIN_LEFT, WIDTH - MARGIN_RIGHT)
    band = (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / max(len(labels), 1)
    for k, (name, v) in enumerate(zip(labels, values)):
        y = MARGIN_TOP + k * band
        parts.append(
            f'<rect class="mark" x="{MARGIN_LEFT}" y="{_f(y + 0.15 * band)}" width="{_f(xs(float(v)) - MARGIN_LEFT)}" '
            f'height="{_f(0.7 * band)}" fill="{color_for(1.0 if k == 0 else 0.0)}"><title>{escape(name)}: {v:.6g}</title></rect>'
        )
        parts.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{_f(y + 0.5 * band + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12">{escape(name)}</text>'
        )
    _x_axis(parts, xs, value_label)
    return _close(parts)


def beeswarm(title: str, features: Sequence[str], rows: Sequence[tuple], seed: int = 0) -> str:
    """Strip plot: one horizontal band per feature, x = Shapley value, colour = normalized value.

    ``rows`` holds ``(feature, phi, normalized_value)``; vertical jitter is
    drawn from a seeded generator so output is reproducible.
    """
    parts = _open(title)
    phis = [float(r[1]) for r in rows] or [0.0]
    lo, hi = min(phis + [0.0]), max(phis + [0.0])
    xs = _Scale(lo, hi, MARGIN_LEFT, WIDTH - MARGIN_RIGHT)
    band = (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / max(len(features), 1)
    pos = {name: k for k, name in enumerate(features)}
    for k, name in enumerate(features):
        yc = MARGIN_TOP + (k + 0.5) * band
        parts.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{_f(yc + 4)}" text-anchor="end" font-family="sans-serif" '
            f'font-size="12">{escape(name)}</text>'
        )
    zero = xs(0.0)
    parts.append(
        f'<line x1="{_f(zero)}" y1="{MARGIN_TOP}" x2="{_f(zero)}" y2="{HEIGHT - MARGIN_BOTTOM}" stroke="#999" stroke-dasharray="3,3"/>'
    )
    jitter = np.random.default_rng(seed).uniform(-0.35, 0.35, len(rows))
    for (name, phi, t), j in zip(rows, jitter):
        yc = MARGIN_TOP + (pos[name] + 0.5 + j) * band
        parts.append(
            f'<circle class="mark" cx="{_f(xs(float(phi)))}" cy="{_f(yc)}" r="2.5" fill="{color_for(t)}" fill-opacity="0.8"/>'
        )
    _x_axis(parts, xs, "Shapley value (log-odds)")
    _legend(parts, "feature value")
    return _close(parts)


def scatter(title: str, points: Sequence[tuple], x_label: str, y_label: str, color_label: str) -> str:
    """Scatter of ``(x, y, color_value)``; colour is min-max normalized over the points."""
    parts = _open(title)
    xs_v = [float(p[0]) for p in points] or [0.0]
    ys_v = [float(p[1]) for p in points] or [0.0]
    cs_v = [float(p[2]) for p in points] or [0.0]
    xs = _Scale(min(xs_v), max(xs_v), MARGIN_LEFT, WIDTH - MARGIN_RIGHT)
    ys = _Scale(min(ys_v), max(ys_v), HEIGHT - MARGIN_BOTTOM, MARGIN_TOP)
    c_lo, c_hi = min(cs_v), max(cs_v)
    for x, y, c in points:
        t = (c - c_lo) / (c_hi - c_lo) if c_hi > c_lo else 0.5
        parts.append(
            f'<circle class="mark" cx="{_f(xs(float(x)))}" cy="{_f(ys(float(y)))}" r="3" fill="{color_for(t)}" fill-opacity="0.8"/>'
        )
    _x_axis(parts, xs, x_label)
    _y_axis(parts, ys, y_label)
    _legend(parts, color_label)
    return _close(parts)
