"""Minimal deterministic SVG line charts (no plotting dependency).

Each chart draws one polyline per series (the mean across seeds), an optional
shaded min-max band, horizontal reference lines for limits, axes with tick
labels, and a legend. Output is plain SVG text with fixed float formatting,
so identical inputs produce identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 16, 36, 46

PALETTE = ("#1f5fbf", "#c23b22", "#e08900", "#2e8b57", "#7b4fa6", "#50b8c8")


@dataclass
class Series:
    name: str
    xs: list[float]
    mean: list[float]
    lo: list[float] | None = None
    hi: list[float] | None = None


@dataclass
class RefLine:
    y: float
    label: str


def _nice_ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_chart(title: str, xlabel: str, ylabel: str, series: list[Series],
                 ref_lines: list[RefLine] = ()) -> str:
    xs_all = [x for s in series for x in s.xs]
    ys_all = [y for s in series for y in s.mean]
    for s in series:
        if s.lo is not None:
            ys_all += list(s.lo) + list(s.hi)
    ys_all += [r.y for r in ref_lines]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad = 0.06 * (y_hi - y_lo) or 1.0
    y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="Helvetica,Arial,sans-serif">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" font-size="15">{title}</text>',
    ]
    # axes
    parts.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#444" stroke-width="1"/>'
    )
    for t in _nice_ticks(x_lo, x_hi):
        if t < x_lo - 1e-9 or t > x_hi + 1e-9:
            continue
        x = px(t)
        parts.append(f'<line x1="{_fmt(x)}" y1="{py(y_lo):.2f}" x2="{_fmt(x)}" '
                     f'y2="{py(y_lo) + 4:.2f}" stroke="#444"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{py(y_lo) + 18:.2f}" text-anchor="middle" '
                     f'font-size="11">{t:g}</text>')
    for t in _nice_ticks(y_lo, y_hi):
        if t < y_lo - 1e-9 or t > y_hi + 1e-9:
            continue
        y = py(t)
        parts.append(f'<line x1="{MARGIN_L - 4}" y1="{_fmt(y)}" x2="{MARGIN_L}" '
                     f'y2="{_fmt(y)}" stroke="#444"/>')
        parts.append(f'<text x="{MARGIN_L - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
                     f'font-size="11">{t:g}</text>')
        parts.append(f'<line x1="{MARGIN_L}" y1="{_fmt(y)}" x2="{MARGIN_L + plot_w}" '
                     f'y2="{_fmt(y)}" stroke="#eee"/>')
    parts.append(f'<text x="{MARGIN_L + plot_w / 2:.0f}" y="{HEIGHT - 10}" '
                 f'text-anchor="middle" font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{MARGIN_T + plot_h / 2:.0f}" text-anchor="middle" '
                 f'font-size="12" transform="rotate(-90 16 {MARGIN_T + plot_h / 2:.0f})">'
                 f'{ylabel}</text>')

    for ref in ref_lines:
        y = py(ref.y)
        parts.append(f'<line x1="{MARGIN_L}" y1="{_fmt(y)}" x2="{MARGIN_L + plot_w}" '
                     f'y2="{_fmt(y)}" stroke="#666" stroke-dasharray="6,4"/>')
        parts.append(f'<text x="{MARGIN_L + plot_w - 4}" y="{_fmt(y - 4)}" '
                     f'text-anchor="end" font-size="11" fill="#666">{ref.label}</text>')

    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        if s.lo is not None and s.hi is not None:
            pts = [f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(s.xs, s.hi)]
            pts += [f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in
                    zip(reversed(s.xs), reversed(s.lo))]
            parts.append(f'<polygon points="{" ".join(pts)}" fill="{color}" '
                         f'fill-opacity="0.15" stroke="none"/>')
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(s.xs, s.mean))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.8"/>')
        ly = MARGIN_T + 14 + 16 * i
        lx = MARGIN_L + 10
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly}" font-size="12">{s.name}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_chart(path, title, xlabel, ylabel, series, ref_lines=()):
    text = render_chart(title, xlabel, ylabel, series, ref_lines)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
