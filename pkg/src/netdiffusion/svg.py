"""Minimal SVG line plots (axes, ticks, polylines, legend).

Output is plain text with fixed number formatting, so the same data always
gives byte-identical files.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from html import escape

import numpy as np

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]
DASHES = ["", "6,3", "2,2", "8,3,2,3"]


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    step: bool = False
    markers: bool = False


@dataclass
class Panel:
    title: str
    xlabel: str
    ylabel: str
    series: list = field(default_factory=list)
    logx: bool = False
    logy: bool = False
    legend: str = "upper right"

    def add(self, label, x, y, step=False, markers=False) -> "Panel":
        self.series.append(Series(label, np.asarray(x, float), np.asarray(y, float),
                                  step, markers))
        return self


def _f(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = np.ceil(lo / step - 1e-9) * step
    return np.arange(start, hi + 1e-9 * step, step)


def _ticks(lo: float, hi: float, log: bool) -> np.ndarray:
    if log:
        t = np.arange(np.ceil(lo - 1e-9), np.floor(hi + 1e-9) + 1)
        if len(t) >= 2:
            return t[:: max(1, len(t) // 6)]
    return _nice_ticks(lo, hi)


def _tick_label(v: float, log: bool) -> str:
    if log:
        return f"1e{int(round(v))}"
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:.4g}"


def _panel_svg(p: Panel, x0: float, y0: float, w: float, h: float) -> list[str]:
    ml, mr, mt, mb = 62, 12, 26, 44
    pw, ph = w - ml - mr, h - mt - mb
    tx = (lambda v: np.log10(v)) if p.logx else (lambda v: v)
    ty = (lambda v: np.log10(v)) if p.logy else (lambda v: v)
    xs, ys = [], []
    for s in p.series:
        ok = np.isfinite(s.x) & np.isfinite(s.y)
        if p.logx:
            ok &= s.x > 0
        if p.logy:
            ok &= s.y > 0
        xs.append(tx(s.x[ok]))
        ys.append(ty(s.y[ok]))
    allx = np.concatenate(xs) if xs else np.zeros(1)
    ally = np.concatenate(ys) if ys else np.zeros(1)
    if allx.size == 0:
        allx = np.zeros(1)
    if ally.size == 0:
        ally = np.zeros(1)
    xlo, xhi = float(allx.min()), float(allx.max())
    ylo, yhi = float(ally.min()), float(ally.max())
    if xhi <= xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi <= ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.04 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def px(v):
        return x0 + ml + (v - xlo) / (xhi - xlo) * pw

    def py(v):
        return y0 + mt + ph - (v - ylo) / (yhi - ylo) * ph

    out = [f'<g font-family="sans-serif" font-size="11">',
           f'<text x="{_f(x0 + ml + pw / 2)}" y="{_f(y0 + 16)}" text-anchor="middle" '
           f'font-size="13">{escape(p.title)}</text>',
           f'<rect x="{_f(x0 + ml)}" y="{_f(y0 + mt)}" width="{_f(pw)}" height="{_f(ph)}" '
           f'fill="none" stroke="#000"/>']
    for v in _ticks(xlo, xhi, p.logx):
        if xlo <= v <= xhi:
            out.append(f'<line x1="{_f(px(v))}" y1="{_f(y0 + mt + ph)}" x2="{_f(px(v))}" '
                       f'y2="{_f(y0 + mt + ph + 4)}" stroke="#000"/>')
            out.append(f'<text x="{_f(px(v))}" y="{_f(y0 + mt + ph + 16)}" '
                       f'text-anchor="middle">{_tick_label(v, p.logx)}</text>')
    for v in _ticks(ylo, yhi, p.logy):
        if ylo <= v <= yhi:
            out.append(f'<line x1="{_f(x0 + ml - 4)}" y1="{_f(py(v))}" x2="{_f(x0 + ml)}" '
                       f'y2="{_f(py(v))}" stroke="#000"/>')
            out.append(f'<text x="{_f(x0 + ml - 6)}" y="{_f(py(v) + 4)}" '
                       f'text-anchor="end">{_tick_label(v, p.logy)}</text>')
    out.append(f'<text x="{_f(x0 + ml + pw / 2)}" y="{_f(y0 + h - 8)}" '
               f'text-anchor="middle">{escape(p.xlabel)}</text>')
    out.append(f'<text transform="translate({_f(x0 + 14)},{_f(y0 + mt + ph / 2)}) '
               f'rotate(-90)" text-anchor="middle">{escape(p.ylabel)}</text>')
    for i, (s, sx, sy) in enumerate(zip(p.series, xs, ys)):
        color = COLORS[i % len(COLORS)]
        dash = DASHES[(i // len(COLORS)) % len(DASHES)]
        if s.step and len(sx):
            sx = np.repeat(sx, 2)[1:]
            sy = np.repeat(sy, 2)[:-1]
        pts = " ".join(f"{_f(px(a))},{_f(py(b))}" for a, b in zip(sx, sy))
        style = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.6"{style}/>')
        if s.markers:
            out += [f'<circle cx="{_f(px(a))}" cy="{_f(py(b))}" r="2.5" fill="{color}"/>'
                    for a, b in zip(sx, sy)]
        if p.legend == "lower right":
            ly = y0 + mt + ph - 8 - 14 * (len(p.series) - 1 - i)
        else:
            ly = y0 + mt + 14 + 14 * i
        lx = x0 + ml + pw - 130
        out.append(f'<line x1="{_f(lx)}" y1="{_f(ly - 4)}" x2="{_f(lx + 18)}" '
                   f'y2="{_f(ly - 4)}" stroke="{color}" stroke-width="2"{style}/>')
        out.append(f'<text x="{_f(lx + 22)}" y="{_f(ly)}">{escape(s.label)}</text>')
    out.append("</g>")
    return out


def render(panels: list[Panel], cols: int | None = None, width: float = 420,
           height: float = 320) -> str:
    """One SVG document holding the panels on a grid."""
    cols = len(panels) if cols is None else cols
    rows = -(-len(panels) // cols)
    W, H = cols * width, rows * height
    body = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(W)}" height="{_f(H)}" '
            f'viewBox="0 0 {_f(W)} {_f(H)}">',
            f'<rect width="{_f(W)}" height="{_f(H)}" fill="#fff"/>']
    for i, p in enumerate(panels):
        body += _panel_svg(p, (i % cols) * width, (i // cols) * height, width, height)
    body.append("</svg>")
    return "\n".join(body) + "\n"


def write_svg(path, panels: list[Panel], cols: int | None = None, **kw) -> None:
    with open(path, "w") as fh:
        fh.write(render(panels, cols, **kw))
