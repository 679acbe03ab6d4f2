"""Self-contained SVG line and scatter charts.

Output is a pure function of the input: coordinates are printed with two
decimals and series keep their given order, so identical data gives
identical bytes.
"""

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=160, top=40, bottom=55)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _fmt(v):
    return f"{v:.2f}"


def _tick_label(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:.4g}"


def _range(values, log):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if log:
        v = v[v > 0]
    if v.size == 0:
        return (1.0, 10.0) if log else (0.0, 1.0)
    lo, hi = float(v.min()), float(v.max())
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


class _Axis:
    def __init__(self, lo, hi, a, b, log):
        self.lo, self.hi, self.a, self.b, self.log = lo, hi, a, b, log

    def __call__(self, v):
        t = math.log10(v) if self.log else v
        return self.a + (t - self.lo) / (self.hi - self.lo) * (self.b - self.a)

    def ticks(self, n=5):
        vals = np.linspace(self.lo, self.hi, n)
        return [(10 ** t if self.log else t) for t in vals]


def line_chart(series, title="", xlabel="", ylabel="", logx=False, logy=False,
               points=None, hline=None):
    """Render ``series`` (list of ``(name, xs, ys)``) as an SVG string.

    ``points`` is an optional list of ``(name, x, y)`` markers drawn on top;
    ``hline`` an optional ``(name, y)`` reference line.  Non-finite values
    (and non-positive ones on log axes) are skipped.
    """
    series = [(n, np.asarray(x, float), np.asarray(y, float)) for n, x, y in series]
    points = points or []
    xs = np.concatenate([s[1] for s in series] + [np.array([p[1] for p in points], float)])
    ys = np.concatenate([s[2] for s in series] + [np.array([p[2] for p in points], float)])
    if hline is not None:
        ys = np.append(ys, hline[1])
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    ax = _Axis(*_range(xs, logx), x0, x1, logx)
    ay = _Axis(*_range(ys, logy), y0, y1, logy)

    def ok(x, y):
        return (np.isfinite(x) and np.isfinite(y) and (not logx or x > 0) and (not logy or y > 0))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
           f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>']
    for v in ax.ticks():
        px = _fmt(ax(v))
        out.append(f'<line x1="{px}" y1="{y0}" x2="{px}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{px}" y="{y0 + 18}" text-anchor="middle">{_tick_label(v)}</text>')
    for v in ay.ticks():
        py = _fmt(ay(v))
        out.append(f'<line x1="{x0 - 5}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{py}" text-anchor="end" dominant-baseline="middle">'
                   f'{_tick_label(v)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2:.0f})">{escape(ylabel)}</text>')

    legend = []
    for k, (name, x, y) in enumerate(series):
        color = COLORS[k % len(COLORS)]
        coords = [f"{_fmt(ax(a))},{_fmt(ay(b))}" for a, b in zip(x, y) if ok(a, b)]
        if coords:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                       f'points="{" ".join(coords)}"/>')
        legend.append((name, color, "line"))
    if hline is not None and np.isfinite(hline[1]) and (not logy or hline[1] > 0):
        py = _fmt(ay(hline[1]))
        out.append(f'<line x1="{x0}" y1="{py}" x2="{x1}" y2="{py}" stroke="#555" stroke-dasharray="4 3"/>')
        legend.append((hline[0], "#555", "dash"))
    for k, (name, x, y) in enumerate(points):
        color = COLORS[(len(series) + k) % len(COLORS)]
        if ok(x, y):
            out.append(f'<circle cx="{_fmt(ax(x))}" cy="{_fmt(ay(y))}" r="4" fill="{color}"/>')
        legend.append((name, color, "dot"))

    lx, ly = x1 + 12, y1 + 6
    for k, (name, color, style) in enumerate(legend):
        yy = ly + 16 * k
        if style == "dot":
            out.append(f'<circle cx="{lx + 8}" cy="{yy}" r="4" fill="{color}"/>')
        else:
            dash = ' stroke-dasharray="4 3"' if style == "dash" else ""
            out.append(f'<line x1="{lx}" y1="{yy}" x2="{lx + 16}" y2="{yy}" stroke="{color}" '
                       f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 22}" y="{yy}" dominant-baseline="middle">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def reliability_diagram(count, acc, conf, title="Reliability"):
    """Per-bin accuracy against confidence, with the diagonal for reference."""
    nz = np.asarray(count) > 0
    return line_chart([("perfect", [0, 1], [0, 1]),
                       ("model", np.asarray(conf)[nz], np.asarray(acc)[nz])],
                      title=title, xlabel="confidence", ylabel="accuracy")


def write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
