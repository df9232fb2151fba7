"""Minimal native SVG line charts. Plot output is cosmetic; CSVs are the contract."""

from __future__ import annotations

import math

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 64, 16, 28, 46


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-9 * abs(step):
        out.append(round(t, 10))
        t += step
    return out


def line_chart(path, series: dict[str, tuple[list[float], list[float]]],
               title: str = "", xlabel: str = "", ylabel: str = "",
               dashed: set[str] | None = None) -> None:
    """Write a multi-series line chart; ``dashed`` names get dashed strokes."""
    dashed = dashed or set()
    xs = [x for pts in series.values() for x in pts[0]]
    ys = [y for pts in series.values() for y in pts[1] if math.isfinite(y)]
    if not xs or not ys:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    pad = 0.06 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return _ML + (x - x0) / (x1 - x0) * (_W - _ML - _MR)

    def py(y):
        return _H - _MB - (y - y0) / (y1 - y0) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W/2:.0f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for tx in _ticks(x0, x1):
        parts.append(f'<line x1="{px(tx):.1f}" y1="{_MT}" x2="{px(tx):.1f}" '
                     f'y2="{_H-_MB}" stroke="#ddd"/>')
        parts.append(f'<text x="{px(tx):.1f}" y="{_H-_MB+16}" text-anchor="middle">'
                     f'{tx:g}</text>')
    for ty in _ticks(y0, y1):
        parts.append(f'<line x1="{_ML}" y1="{py(ty):.1f}" x2="{_W-_MR}" '
                     f'y2="{py(ty):.1f}" stroke="#ddd"/>')
        parts.append(f'<text x="{_ML-6}" y="{py(ty)+4:.1f}" text-anchor="end">{ty:g}</text>')
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{_W-_ML-_MR}" '
                 f'height="{_H-_MT-_MB}" fill="none" stroke="#444"/>')
    parts.append(f'<text x="{_W/2:.0f}" y="{_H-10}" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_H/2:.0f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {_H/2:.0f})">{ylabel}</text>')

    for i, (name, (sx, sy)) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(sx, sy)
                       if math.isfinite(y))
        dash = ' stroke-dasharray="6 4"' if name in dashed else ""
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.8"{dash}/>')
        ly = _MT + 16 + 16 * i
        parts.append(f'<line x1="{_W-_MR-130}" y1="{ly}" x2="{_W-_MR-104}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"{dash}/>')
        parts.append(f'<text x="{_W-_MR-98}" y="{ly+4}">{name}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))
