"""Deterministic SVG bar charts with standard-deviation error bars."""

from __future__ import annotations

from xml.sax.saxutils import escape

WIDTH, HEIGHT = 720, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 120
PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3",
           "#8c8c8c", "#ccb974", "#64b5cd")


def _f(v):
    return f"{v:.2f}"


def bar_chart_svg(title, labels, means, stds, ylabel="") -> str:
    """One bar per label with error bars and a dashed rule at the lowest mean.

    Labels whose mean is ``None`` are drawn as an empty slot marked ``n/a``.
    """
    if not labels:
        raise ValueError("bar chart needs at least one bar")
    vals = [m for m in means if m is not None]
    tops = [m + (s or 0.0) for m, s in zip(means, stds) if m is not None]
    lo = min([0.0] + [m - (s or 0.0) for m, s in zip(means, stds) if m is not None])
    hi = max(tops) if tops else 1.0
    if hi <= lo:
        hi = lo + 1.0
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM
    slot = plot_w / len(labels)
    bar_w = slot * 0.6

    def y(v):
        return TOP + plot_h * (hi - v) / (hi - lo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" stroke="black"/>',
           f'<line x1="{LEFT}" y1="{_f(y(0.0))}" x2="{WIDTH - RIGHT}" y2="{_f(y(0.0))}" stroke="black"/>']
    for k in range(6):
        v = lo + (hi - lo) * k / 5
        out.append(f'<text x="{LEFT - 6}" y="{_f(y(v) + 4)}" text-anchor="end">{v:.3g}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{_f(TOP + plot_h / 2)}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {_f(TOP + plot_h / 2)})">{escape(ylabel)}</text>')
    for i, (lab, m, s) in enumerate(zip(labels, means, stds)):
        cx = LEFT + slot * (i + 0.5)
        out.append(f'<g class="bar-group" data-method="{escape(lab)}">')
        if m is None:
            out.append(f'<text x="{_f(cx)}" y="{_f(y(0.0) - 4)}" text-anchor="middle">n/a</text>')
        else:
            y0, y1 = sorted((y(0.0), y(m)))
            out.append(f'<rect x="{_f(cx - bar_w / 2)}" y="{_f(y0)}" width="{_f(bar_w)}" '
                       f'height="{_f(y1 - y0)}" fill="{PALETTE[i % len(PALETTE)]}"/>')
            s = s or 0.0
            out.append(f'<line x1="{_f(cx)}" y1="{_f(y(m - s))}" x2="{_f(cx)}" y2="{_f(y(m + s))}" '
                       f'stroke="black"/>')
            for v in (m - s, m + s):
                out.append(f'<line x1="{_f(cx - 5)}" y1="{_f(y(v))}" x2="{_f(cx + 5)}" y2="{_f(y(v))}" '
                           f'stroke="black"/>')
        ty = TOP + plot_h + 12
        out.append(f'<text x="{_f(cx)}" y="{_f(ty)}" text-anchor="end" '
                   f'transform="rotate(-45 {_f(cx)} {_f(ty)})">{escape(lab)}</text>')
        out.append('</g>')
    if vals:
        best = min(vals)
        out.append(f'<line class="best" x1="{LEFT}" y1="{_f(y(best))}" x2="{WIDTH - RIGHT}" '
                   f'y2="{_f(y(best))}" stroke="black" stroke-dasharray="6 3"/>')
    out.append('</svg>')
    return "\n".join(out) + "\n"
