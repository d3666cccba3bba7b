"""Minimal deterministic SVG writers (scatter and box plots).

Hand-rolled on purpose: output bytes depend only on the inputs, so report
plots satisfy the same reproducibility contract as data files.
"""

from __future__ import annotations

import numpy as np

_W, _H = 640, 480
_MARGIN = 50


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _scale(values, lo, hi, out_lo, out_hi):
    span = hi - lo if hi > lo else 1.0
    return out_lo + (np.asarray(values, dtype=float) - lo) * (out_hi - out_lo) / span


def _frame(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_W - 2 * _MARGIN}" '
        f'height="{_H - 2 * _MARGIN}" fill="none" stroke="black"/>',
        f'<text x="{_W // 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]


def _shade(base: tuple[int, int, int], frac: float) -> str:
    # darken toward 25% of the base color as frac goes 0 -> 1
    r, g, b = (int(round(c * (1.0 - 0.75 * frac))) for c in base)
    return f"rgb({r},{g},{b})"


def scatter_svg(path, groups, title: str = "") -> None:
    """Scatter plot of 2-D trajectories, color darkening with time.

    ``groups`` is a list of ``(label, points, rgb)`` with ``points`` of
    shape (N, 2) and ``rgb`` a base color triple.
    """
    all_pts = np.concatenate([np.asarray(p, dtype=float) for _, p, _ in groups])
    x_lo, x_hi = float(all_pts[:, 0].min()), float(all_pts[:, 0].max())
    y_lo, y_hi = float(all_pts[:, 1].min()), float(all_pts[:, 1].max())
    parts = _frame(title)
    for gi, (label, pts, rgb) in enumerate(groups):
        pts = np.asarray(pts, dtype=float)
        xs = _scale(pts[:, 0], x_lo, x_hi, _MARGIN + 5, _W - _MARGIN - 5)
        ys = _scale(pts[:, 1], y_lo, y_hi, _H - _MARGIN - 5, _MARGIN + 5)
        n = len(pts)
        for i, (x, y) in enumerate(zip(xs, ys)):
            color = _shade(rgb, i / max(n - 1, 1))
            parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="2" '
                         f'fill="{color}"/>')
        lx = _W - _MARGIN - 120
        ly = _MARGIN + 18 * (gi + 1)
        parts.append(f'<circle cx="{lx}" cy="{ly - 4}" r="4" '
                     f'fill="{_shade(rgb, 0.5)}"/>')
        parts.append(f'<text x="{lx + 10}" y="{ly}" font-family="sans-serif" '
                     f'font-size="12">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")


def boxplot_svg(path, groups, title: str = "", overall_median: float | None = None) -> None:
    """Box plot per group: ``groups`` is a list of ``(label, values)``."""
    stats = []
    for label, values in groups:
        arr = np.asarray(values, dtype=float)
        lo, q1, med, q3, hi = np.percentile(arr, [5, 25, 50, 75, 95])
        stats.append((label, lo, q1, med, q3, hi))
    v_lo = min(s[1] for s in stats)
    v_hi = max(s[5] for s in stats)
    if overall_median is not None:
        v_lo, v_hi = min(v_lo, overall_median), max(v_hi, overall_median)
    parts = _frame(title)
    inner_w = _W - 2 * _MARGIN
    slot = inner_w / len(stats)
    box_w = min(60.0, slot * 0.5)

    def yc(v):
        return float(_scale([v], v_lo, v_hi, _H - _MARGIN - 5, _MARGIN + 5)[0])

    if overall_median is not None:
        y = yc(overall_median)
        parts.append(f'<line x1="{_MARGIN}" y1="{_fmt(y)}" x2="{_W - _MARGIN}" '
                     f'y2="{_fmt(y)}" stroke="red" stroke-dasharray="6,4"/>')
    for i, (label, lo, q1, med, q3, hi) in enumerate(stats):
        cx = _MARGIN + slot * (i + 0.5)
        x0, x1 = cx - box_w / 2, cx + box_w / 2
        parts.append(f'<line x1="{_fmt(cx)}" y1="{_fmt(yc(lo))}" x2="{_fmt(cx)}" '
                     f'y2="{_fmt(yc(hi))}" stroke="black"/>')
        parts.append(f'<rect x="{_fmt(x0)}" y="{_fmt(yc(q3))}" '
                     f'width="{_fmt(box_w)}" height="{_fmt(yc(q1) - yc(q3))}" '
                     f'fill="lightsteelblue" stroke="black"/>')
        parts.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(yc(med))}" x2="{_fmt(x1)}" '
                     f'y2="{_fmt(yc(med))}" stroke="navy" stroke-width="2"/>')
        parts.append(f'<text x="{_fmt(cx)}" y="{_H - _MARGIN + 20}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="12">{label}</text>')
    for v in (v_lo, v_hi):
        parts.append(f'<text x="{_MARGIN - 6}" y="{_fmt(yc(v) + 4)}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="10">{v:.2f}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
