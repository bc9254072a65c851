"""Minimal static SVG line/scatter plots with deterministic output."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = 56
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str
    style: str = "line"  # "line", "points" or "hline"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (step * m) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def plot(series: Sequence[Series], title: str, xlabel: str, ylabel: str) -> str:
    xs = np.concatenate([np.asarray(s.x, float) for s in series if s.style != "hline"] or [np.zeros(1)])
    ys = np.concatenate([np.asarray(s.y, float) for s in series])
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    pad = 0.05 * (y1 - y0 if y1 > y0 else 1.0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(v):
        return MARGIN + (v - x0) / (x1 - x0) * pw

    def py(v):
        return HEIGHT - MARGIN - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="14">{_esc(title)}</text>',
           f'<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<text x="{_fmt(px(t))}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<text x="{MARGIN - 6}" y="{_fmt(py(t) + 4)}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{HEIGHT / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {HEIGHT / 2:.0f})">{_esc(ylabel)}</text>')
    for k, s in enumerate(series):
        color = COLORS[k % len(COLORS)]
        x = np.asarray(s.x, float)
        y = np.asarray(s.y, float)
        if s.style == "hline":
            yy = _fmt(py(float(y[0])))
            out.append(f'<line x1="{MARGIN}" y1="{yy}" x2="{MARGIN + pw}" y2="{yy}" stroke="{color}" '
                       'stroke-dasharray="6 4"/>')
        elif s.style == "points":
            for a, b in zip(x, y):
                if math.isfinite(a) and math.isfinite(b):
                    out.append(f'<circle cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="3" fill="{color}"/>')
        else:
            pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(x, y) if math.isfinite(b))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN + 16 + 16 * k
        out.append(f'<rect x="{MARGIN + pw - 150}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{MARGIN + pw - 135}" y="{ly}">{_esc(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
