"""Minimal SVG line charts for benchmark reports."""
from __future__ import annotations

from collections import OrderedDict
from html import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f", "#bcbd22", "#17becf")

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 180, 40, 50


def _scale(v, lo, hi, a, b):
    if hi <= lo:
        return (a + b) / 2
    return a + (v - lo) * (b - a) / (hi - lo)


def objective_chart(rows, title: str = "") -> str:
    """Objective (max group cost) against k, one line per algorithm setting.

    With more than two groups a dashed line shows the minimum group cost of
    the same setting.
    """
    series: "OrderedDict[str, list]" = OrderedDict()
    for r in rows:
        label = r.algorithm + (f" ({r.params_str()})" if r.params else "")
        series.setdefault(label, []).append(r)
    xs = [r.k for r in rows]
    ys = [r.objective for r in rows] + [min(r.group_costs) for r in rows]
    x0, x1 = min(xs), max(xs)
    y0, y1 = 0.0, max(ys) * 1.05 if max(ys) > 0 else 1.0

    def px(x):
        return _scale(x, x0, x1, LEFT, W - RIGHT)

    def py(y):
        return _scale(y, y0, y1, H - BOTTOM, TOP)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
           f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="black"/>',
           f'<text x="{(LEFT + W - RIGHT) / 2}" y="{H - 12}" text-anchor="middle">k</text>',
           f'<text x="16" y="{(TOP + H - BOTTOM) / 2}" text-anchor="middle" '
           f'transform="rotate(-90 16 {(TOP + H - BOTTOM) / 2})">objective</text>']
    for k in sorted(set(xs)):
        out.append(f'<text x="{px(k):.1f}" y="{H - BOTTOM + 15}" text-anchor="middle">{k}</text>')
    for q in range(5):
        v = y0 + (y1 - y0) * q / 4
        out.append(f'<text x="{LEFT - 6}" y="{py(v) + 4:.1f}" text-anchor="end">{v:.3g}</text>')

    multi = any(len(r.group_costs) > 2 for r in rows)
    for idx, (label, rs) in enumerate(series.items()):
        color = PALETTE[idx % len(PALETTE)]
        rs = sorted(rs, key=lambda r: r.k)
        pts = " ".join(f"{px(r.k):.1f},{py(r.objective):.1f}" for r in rs)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        if multi:
            lo = " ".join(f"{px(r.k):.1f},{py(min(r.group_costs)):.1f}" for r in rs)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-dasharray="4 3" points="{lo}"/>')
        ly = TOP + 16 * idx
        out.append(f'<line x1="{W - RIGHT + 10}" y1="{ly}" x2="{W - RIGHT + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - RIGHT + 34}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
