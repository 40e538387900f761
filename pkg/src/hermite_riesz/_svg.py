"""Tiny self-contained SVG line plots (no external renderer)."""

from __future__ import annotations

import math

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 34, 48


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def render_plot(xs, ys, title: str, xlabel: str = "", ylabel: str = "",
                loglog: bool = True, annotation: str = "") -> str:
    """Render one polyline with dots; log-log when data allows it."""
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    if not xs:
        xs, ys = [1.0], [1.0]
    use_log = loglog and all(x > 0 for x in xs) and all(y > 0 for y in ys)
    tx = [math.log10(x) for x in xs] if use_log else xs
    ty = [math.log10(y) for y in ys] if use_log else ys

    def span(v):
        lo, hi = min(v), max(v)
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        return lo - pad, hi + pad

    x0, x1 = span(tx)
    y0, y1 = span(ty)

    def px(v):
        return _ML + (v - x0) / (x1 - x0) * (_W - _ML - _MR)

    def py(v):
        return _H - _MB - (v - y0) / (y1 - y0) * (_H - _MT - _MB)

    pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(tx, ty))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W//2}" y="20" text-anchor="middle" font-size="14" '
        f'font-family="monospace">{title}</text>',
        f'<line x1="{_ML}" y1="{_H-_MB}" x2="{_W-_MR}" y2="{_H-_MB}" '
        f'stroke="black" stroke-width="1"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H-_MB}" '
        f'stroke="black" stroke-width="1"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        vx = x0 + frac * (x1 - x0)
        vy = y0 + frac * (y1 - y0)
        lx = 10.0**vx if use_log else vx
        ly = 10.0**vy if use_log else vy
        parts.append(f'<text x="{px(vx):.1f}" y="{_H-_MB+16}" text-anchor="middle" '
                     f'font-size="11" font-family="monospace">{_fmt(lx)}</text>')
        parts.append(f'<text x="{_ML-6}" y="{py(vy)+4:.1f}" text-anchor="end" '
                     f'font-size="11" font-family="monospace">{_fmt(ly)}</text>')
    if xlabel:
        parts.append(f'<text x="{_W//2}" y="{_H-10}" text-anchor="middle" '
                     f'font-size="12" font-family="monospace">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="16" y="{_H//2}" font-size="12" font-family="monospace" '
                     f'transform="rotate(-90 16 {_H//2})" text-anchor="middle">{ylabel}</text>')
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#1f4e8c" stroke-width="1.5"/>')
    for a, b in zip(tx, ty):
        parts.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="#1f4e8c"/>')
    if annotation:
        parts.append(f'<text x="{_W-_MR-6}" y="{_MT+14}" text-anchor="end" '
                     f'font-size="12" font-family="monospace">{annotation}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
