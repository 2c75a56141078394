"""Dependency-free SVG line charts with byte-stable output."""

from __future__ import annotations

from xml.sax.saxutils import escape

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
    "#9467bd", "#8c564b", "#e377c2", "#17becf",
)
WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 180, 40, 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _range(values):
    lo, hi = min(values), max(values)
    if hi - lo < 1e-12:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _ticks(lo, hi, n=5):
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def line_chart(series, x_label, y_label, title="") -> str:
    """Render ``series`` ([(name, [(x, y), ...]), ...]) as an SVG document.

    Every point also gets a circle marker so single-point series stay visible.
    """
    points = [p for _, pts in series for p in pts]
    if not points:
        raise ValueError("nothing to plot")
    x0, x1 = _range([p[0] for p in points])
    y0, y1 = _range([p[1] for p in points])
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="#333"/>')
    for t in _ticks(x0, x1):
        x = sx(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{TOP + ph}" x2="{_fmt(x)}" '
                   f'y2="{TOP + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{_fmt(x)}" y="{TOP + ph + 18}" '
                   f'text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        y = sy(t)
        out.append(f'<line x1="{LEFT - 5}" y1="{_fmt(y)}" x2="{LEFT}" '
                   f'y2="{_fmt(y)}" stroke="#333"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_fmt(y + 4)}" '
                   f'text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 15}" '
               f'text-anchor="middle">{escape(x_label)}</text>')
    out.append(f'<text x="18" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + ph / 2:.2f})">{escape(y_label)}</text>')

    for i, (name, pts) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        out.append(f'<polyline class="series" data-name="{escape(name)}" points="{coords}" '
                   f'fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>')
        ly = TOP + 10 + 18 * i
        lx = WIDTH - RIGHT + 15
        out.append(f'<g class="legend-entry"><line x1="{lx}" y1="{ly}" x2="{lx + 20}" '
                   f'y2="{ly}" stroke="{color}" stroke-width="2"/>'
                   f'<text x="{lx + 26}" y="{ly + 4}">{escape(name)}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
