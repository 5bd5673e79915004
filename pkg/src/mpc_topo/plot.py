"""Dependency-free SVG rendering of PDAPs, clustering results and threshold sweeps.

Output is a pure function of the input data: fixed number formatting, no
timestamps, no random colours.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .clusterer import OUTLIER, ClusteringResult
from .pdap import Pdap
from .scatterer import forward_model

__all__ = ["render_pdap", "render_result", "render_sweep", "PALETTE"]

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
           "#bcbd22", "#7f7f7f"]

W, H = 720, 480
ML, MR, MT, MB = 70, 20, 30, 50


def _f(v: float) -> str:
    return f"{v:.2f}"


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0

    def px(self, x):
        return ML + (np.asarray(x, float) - self.x0) / (self.x1 - self.x0) * (W - ML - MR)

    def py(self, y):
        return H - MB - (np.asarray(y, float) - self.y0) / (self.y1 - self.y0) * (H - MT - MB)


def _ticks(lo, hi, n=6):
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw)) if raw > 0 else 1.0
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _frame(ax: _Axes, title: str, xlabel: str, ylabel: str) -> list[str]:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(ax.x0, ax.x1):
        x = _f(ax.px(t))
        out.append(f'<line x1="{x}" y1="{H - MB}" x2="{x}" y2="{H - MB + 4}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{H - MB + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(ax.y0, ax.y1):
        y = _f(ax.py(t))
        out.append(f'<line x1="{ML - 4}" y1="{y}" x2="{ML}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{ML - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">{t:g}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{H / 2}" text-anchor="middle" transform="rotate(-90 16 {H / 2})">'
               f'{escape(ylabel)}</text>')
    return out


def _heat(v, lo, hi):
    """Grey-to-yellow ramp for power in [lo, hi]."""
    t = 0.0 if hi <= lo else min(1.0, max(0.0, (v - lo) / (hi - lo)))
    r = int(round(40 + 215 * t))
    g = int(round(40 + 200 * t))
    b = int(round(60 * (1 - t)))
    return f"#{r:02x}{g:02x}{b:02x}"


def _heat_layer(ax: _Axes, p: Pdap, floor_db: float | None) -> list[str]:
    lo = float(p.power.min()) if floor_db is None else floor_db
    hi = float(p.power.max())
    dx = abs(float(ax.px(p.delay_step) - ax.px(0)))
    dy = abs(float(ax.py(0) - ax.py(p.angle_step)))
    out = ['<g id="pdap">']
    for i, tau in enumerate(p.delay_axis):
        for j, phi in enumerate(p.angle_axis):
            v = p.power[i, j]
            if floor_db is not None and v <= floor_db:
                continue
            out.append(f'<rect x="{_f(ax.px(tau) - dx / 2)}" y="{_f(ax.py(phi) - dy / 2)}" width="{_f(dx)}" '
                       f'height="{_f(dy)}" fill="{_heat(v, lo, hi)}"/>')
    out.append("</g>")
    return out


def render_pdap(p: Pdap, floor_db: float | None = None, title: str = "PDAP") -> str:
    ax = _Axes((p.delay_axis[0], p.delay_axis[-1]), (p.angle_axis[0], p.angle_axis[-1]))
    out = _frame(ax, title, "delay (ns)", "AoA (deg)")
    out += _heat_layer(ax, p, floor_db)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_result(result: ClusteringResult, p: Pdap | None = None, title: str = "clusters", walls=()) -> str:
    """Per-cluster coloured samples, CPs as crosses and fitted wall curves.

    Walls come from the clusters' scatterer models plus any ``WallParams`` in ``walls``.
    """
    s = result.samples
    if p is not None:
        ax = _Axes((p.delay_axis[0], p.delay_axis[-1]), (p.angle_axis[0], p.angle_axis[-1]))
    else:
        ax = _Axes((float(s.tau.min()) - 1, float(s.tau.max()) + 1), (float(s.phi.min()) - 5, float(s.phi.max()) + 5))
    out = _frame(ax, title, "delay (ns)", "AoA (deg)")
    if p is not None:
        out += _heat_layer(ax, p, float(s.power.min()))
    ids = [c.id for c in result.clusters]
    colour = {cid: PALETTE[k % len(PALETTE)] for k, cid in enumerate(ids)}
    out.append('<g id="samples">')
    for n in range(len(s)):
        lab = int(result.labels[n])
        fill = "#bbbbbb" if lab == OUTLIER else colour[lab]
        out.append(f'<circle cx="{_f(ax.px(s.tau[n]))}" cy="{_f(ax.py(s.phi[n]))}" r="1.6" fill="{fill}"/>')
    out.append("</g>")
    out.append('<g id="cps" stroke="black" stroke-width="0.8">')
    for c in result.clusters:
        for cp in c.cps:
            x, y = float(ax.px(cp.tau)), float(ax.py(cp.phi))
            out.append(f'<path d="M{_f(x - 2.5)} {_f(y - 2.5)}L{_f(x + 2.5)} {_f(y + 2.5)}'
                       f'M{_f(x - 2.5)} {_f(y + 2.5)}L{_f(x + 2.5)} {_f(y - 2.5)}"/>')
    out.append("</g>")
    curves = [c.scatterer.wall.params for c in result.clusters
              if getattr(c.scatterer, "kind", None) == "wall" and c.scatterer.wall is not None]
    for prm in curves + list(walls):
        xs = np.linspace(prm.x_range[0], prm.x_range[1], 100)
        tau, phi = forward_model(prm, xs)
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(ax.px(tau), ax.py(phi)))
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')
    for k, cid in enumerate(ids):
        y = MT + 14 + 14 * k
        out.append(f'<rect x="{W - MR - 70}" y="{y - 8}" width="8" height="8" fill="{colour[cid]}"/>')
        out.append(f'<text x="{W - MR - 58}" y="{y}">cluster {cid}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_sweep(table: dict, title: str = "cluster count vs threshold") -> str:
    """``table`` = {"thresholds_db": [...], "counts": {algorithm: [...]}}."""
    th = np.asarray(table["thresholds_db"], float)
    counts = table["counts"]
    hi = max((max(v) for v in counts.values() if v), default=1)
    ax = _Axes((float(th.min()), float(th.max())), (0.0, float(hi) + 1.0))
    out = _frame(ax, title, "power threshold (dB)", "cluster count")
    for k, (name, vals) in enumerate(sorted(counts.items())):
        col = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in zip(ax.px(th), ax.py(vals)))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        y = MT + 14 + 14 * k
        out.append(f'<rect x="{W - MR - 110}" y="{y - 8}" width="8" height="8" fill="{col}"/>')
        out.append(f'<text x="{W - MR - 98}" y="{y}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
