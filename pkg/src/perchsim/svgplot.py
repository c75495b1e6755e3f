"""Self-contained SVG line chart of logged channels (mm against seconds)."""

from __future__ import annotations

import math

import numpy as np

from .simrun import TrajectoryLog

WIDTH, HEIGHT = 800, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 110, 20, 45
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
DEFAULT_CHANNELS = ("px", "py", "pz")
POSITION_CHANNELS = ("px", "py", "pz")
MAX_POINTS = 2000


class PlotError(ValueError):
    pass


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    span = hi - lo
    raw = span / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9)
    ticks = []
    k = first
    while k * step <= hi + 1e-9 * step:
        ticks.append(k * step)
        k += 1
    return ticks


def _fmt(v: float) -> str:
    s = f"{v:.6g}"
    return "0" if s == "-0" else s


def render_svg(log: TrajectoryLog, channels=DEFAULT_CHANNELS, title: str | None = None) -> str:
    """Position channels (metres in the log) are drawn in mm; others as logged."""
    channels = tuple(channels)
    if not channels:
        raise PlotError("no channels requested")
    for c in channels:
        if c not in log.columns or c == "t":
            raise PlotError(f"unknown channel {c!r} (available: {', '.join(x for x in log.columns if x != 't')})")
    if "t" not in log.columns or len(log.data) == 0:
        raise PlotError("log has no time rows")
    t = log.channel("t")
    # evenly spaced samples that always include the last row
    idx = np.unique(np.linspace(0, len(t) - 1, min(len(t), MAX_POINTS)).round().astype(int))
    series = []
    for c in channels:
        y = log.channel(c)[idx]
        series.append(y * 1e3 if c in POSITION_CHANNELS else y)
    ts = t[idx]
    t0, t1 = float(ts[0]), float(ts[-1])
    if t1 <= t0:
        t1 = t0 + 1.0
    ylo = float(min(s.min() for s in series))
    yhi = float(max(s.max() for s in series))
    if not (math.isfinite(ylo) and math.isfinite(yhi)):
        raise PlotError("log contains non-finite values")
    pad = 0.05 * (yhi - ylo) if yhi > ylo else max(1.0, abs(yhi) * 0.1)
    ylo, yhi = ylo - pad, yhi + pad
    pw, ph = WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        return MARGIN_L + (v - t0) / (t1 - t0) * pw

    def sy(v):
        return MARGIN_T + (yhi - v) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(ylo, yhi):
        y = sy(v)
        out.append(f'<line x1="{MARGIN_L - 4}" y1="{y:.2f}" x2="{MARGIN_L + pw}" y2="{y:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{y + 4:.2f}" font-size="11" text-anchor="end">{_fmt(v)}</text>')
    for v in _ticks(t0, t1):
        x = sx(v)
        out.append(f'<line x1="{x:.2f}" y1="{MARGIN_T}" x2="{x:.2f}" y2="{MARGIN_T + ph + 4}" stroke="#dddddd"/>')
        out.append(f'<text x="{x:.2f}" y="{MARGIN_T + ph + 18}" font-size="11" text-anchor="middle">{_fmt(v)}</text>')
    unit = "mm" if all(c in POSITION_CHANNELS for c in channels) else "mm / native units"
    out.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 6}" font-size="12" text-anchor="middle">time (s)</text>')
    out.append(
        f'<text x="14" y="{MARGIN_T + ph / 2:.1f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {MARGIN_T + ph / 2:.1f})">{unit}</text>'
    )
    if title:
        esc = title.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        out.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="14" font-size="13" text-anchor="middle">{esc}</text>')
    for k, (c, y) in enumerate(zip(channels, series)):
        color = COLORS[k % len(COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(ts.tolist(), y.tolist()))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN_T + 16 + 18 * k
        lx = MARGIN_L + pw + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}" font-size="12">{c}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
