"""Minimal SVG line plots (polyline + axes + error bars); the CSV files are
the contract, these are a convenience so results can be eyeballed without a
plotting stack.
"""

from __future__ import annotations

from dataclasses import dataclass

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 150, 40, 50

PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
]


@dataclass
class Series:
    label: str
    points: list  # [(x, y, err), ...]


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    return [lo + span * i / (n - 1) for i in range(n)]


def line_plot(path, series: list[Series], title: str = "", xlabel: str = "", ylabel: str = "") -> None:
    pts = [(float(x), float(y), float(e)) for s in series for x, y, e in s.points]
    if not pts:
        raise ValueError("nothing to plot")
    xlo = min(p[0] for p in pts)
    xhi = max(p[0] for p in pts)
    ylo = min(p[1] - p[2] for p in pts)
    yhi = max(p[1] + p[2] for p in pts)
    if xhi == xlo:
        xhi = xlo + 1.0
    pad = 0.05 * (yhi - ylo) or 1.0
    ylo -= pad
    yhi += pad

    px_w = WIDTH - MARGIN_L - MARGIN_R
    px_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + px_w * (x - xlo) / (xhi - xlo)

    def sy(y):
        return MARGIN_T + px_h * (1.0 - (y - ylo) / (yhi - ylo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    # axes
    x0, y0 = MARGIN_L, MARGIN_T + px_h
    parts.append(
        f'<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}" stroke="black"/>'
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + px_w}" y2="{y0}" stroke="black"/>'
    )
    for t in _ticks(xlo, xhi):
        parts.append(
            f'<line x1="{sx(t):.1f}" y1="{y0}" x2="{sx(t):.1f}" y2="{y0 + 5}" stroke="black"/>'
            f'<text x="{sx(t):.1f}" y="{y0 + 18}" text-anchor="middle">{t:g}</text>'
        )
    for t in _ticks(ylo, yhi):
        parts.append(
            f'<line x1="{x0 - 5}" y1="{sy(t):.1f}" x2="{x0}" y2="{sy(t):.1f}" stroke="black"/>'
            f'<text x="{x0 - 8}" y="{sy(t) + 4:.1f}" text-anchor="end">{t:.4g}</text>'
        )
    parts.append(
        f'<text x="{x0 + px_w / 2:.0f}" y="{HEIGHT - 10}" text-anchor="middle">{xlabel}</text>'
        f'<text x="18" y="{MARGIN_T + px_h / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {MARGIN_T + px_h / 2:.0f})">{ylabel}</text>'
    )
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        ordered = sorted(s.points, key=lambda p: p[0])
        poly = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y, _ in ordered)
        parts.append(f'<polyline points="{poly}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y, e in ordered:
            parts.append(
                f'<line x1="{sx(x):.1f}" y1="{sy(y - e):.1f}" x2="{sx(x):.1f}" '
                f'y2="{sy(y + e):.1f}" stroke="{color}" stroke-width="1"/>'
                f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="2.5" fill="{color}"/>'
            )
        ly = MARGIN_T + 15 * i
        lx = MARGIN_L + px_w + 10
        parts.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>'
            f'<text x="{lx + 24}" y="{ly + 4}">{s.label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
