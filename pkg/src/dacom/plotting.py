"""Self-contained SVG learning-curve rendering (no plotting libraries).

Metrics files are grouped by (algorithm, mean delay ratio); multiple seeds
per group produce a mean curve with a 95% confidence band
(mean +/- 1.96 * stderr across seeds). When the inputs span several delay
ratios a second panel plots the final reward against the ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import read_metrics_csv

__all__ = ["render_curves", "curve_statistics", "CurveGroup"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f"]


@dataclass
class CurveGroup:
    label: str
    algorithm: str
    ratio: float
    episodes: np.ndarray
    mean: np.ndarray
    half_width: np.ndarray   # zero when only one seed
    seeds: int


def curve_statistics(paths) -> list[CurveGroup]:
    """Group metrics files by (algorithm, ratio) and compute the per-episode
    mean reward and 95% half-width across seeds."""
    if not paths:
        raise ValueError("at least one metrics file is required")
    grouped: dict[tuple[str, float], list[np.ndarray]] = {}
    for path in paths:
        provenance, rows = read_metrics_csv(path)
        if not rows:
            raise ValueError(f"{path}: no metric rows")
        key = (provenance.get("algorithm", "unknown"),
               float(provenance.get("mean_delay_ratio", "nan")))
        grouped.setdefault(key, []).append(
            np.array([r.reward_mean for r in rows]))
    out = []
    for (algorithm, ratio), series in sorted(grouped.items()):
        n = min(len(s) for s in series)
        stacked = np.stack([s[:n] for s in series])
        mean = stacked.mean(axis=0)
        if stacked.shape[0] > 1:
            half = 1.96 * stacked.std(axis=0, ddof=1) / math.sqrt(stacked.shape[0])
        else:
            half = np.zeros(n)
        out.append(CurveGroup(
            label=f"{algorithm} w={ratio:g}", algorithm=algorithm, ratio=ratio,
            episodes=np.arange(n), mean=mean, half_width=half,
            seeds=stacked.shape[0]))
    return out


def _smooth(y: np.ndarray, window: int) -> np.ndarray:
    if window <= 1 or y.size <= window:
        return y
    kernel = np.ones(window) / window
    pad = np.concatenate([np.full(window - 1, y[0]), y])
    return np.convolve(pad, kernel, mode="valid")


class _Panel:
    """Maps data coordinates to pixel coordinates within a rectangle."""

    def __init__(self, x0, y0, width, height, xlim, ylim):
        self.x0, self.y0, self.width, self.height = x0, y0, width, height
        self.xlim, self.ylim = xlim, ylim

    def px(self, x):
        lo, hi = self.xlim
        span = (hi - lo) or 1.0
        return self.x0 + (np.asarray(x) - lo) / span * self.width

    def py(self, y):
        lo, hi = self.ylim
        span = (hi - lo) or 1.0
        return self.y0 + self.height - (np.asarray(y) - lo) / span * self.height


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _polyline(xs, ys, color, width=1.6, dash=None) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(np.atleast_1d(xs),
                                                          np.atleast_1d(ys)))
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
            f'{dash_attr} points="{pts}"/>')


def _band(xs, lo, hi, color) -> str:
    xs, lo, hi = map(np.atleast_1d, (xs, lo, hi))
    pts = [f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, hi)]
    pts += [f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs[::-1], lo[::-1])]
    return f'<polygon fill="{color}" fill-opacity="0.18" stroke="none" points="{" ".join(pts)}"/>'


def _text(x, y, s, size=11, anchor="start", rotate=None) -> str:
    t = f' transform="rotate({rotate} {_fmt(x)} {_fmt(y)})"' if rotate else ""
    return (f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" '
            f'font-family="sans-serif" text-anchor="{anchor}"{t}>{s}</text>')


def _axes(panel: _Panel, xlabel: str, ylabel: str, parts: list):
    x0, y0, w, h = panel.x0, panel.y0, panel.width, panel.height
    parts.append(f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" '
                 f'fill="none" stroke="#444" stroke-width="1"/>')
    for k in range(5):
        fx = panel.xlim[0] + k / 4 * (panel.xlim[1] - panel.xlim[0])
        fy = panel.ylim[0] + k / 4 * (panel.ylim[1] - panel.ylim[0])
        parts.append(_text(float(panel.px(fx)), y0 + h + 14, f"{fx:.4g}",
                           anchor="middle"))
        parts.append(_text(x0 - 6, float(panel.py(fy)) + 4, f"{fy:.4g}",
                           anchor="end"))
    parts.append(_text(x0 + w / 2, y0 + h + 30, xlabel, anchor="middle"))
    parts.append(_text(x0 - 52, y0 + h / 2, ylabel, anchor="middle", rotate=-90))


def render_curves(metric_paths, out_path, smooth_window: int | None = None) -> Path:
    """Render learning curves (and a reward-vs-ratio panel when applicable)
    to a standalone SVG 1.1 file."""
    groups = curve_statistics(metric_paths)
    ratios = sorted({g.ratio for g in groups})
    two_panels = len(ratios) > 1
    width = 980 if two_panels else 620
    height = 430
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]

    # panel 1: reward vs episode
    all_eps = max(int(g.episodes[-1]) for g in groups) if groups else 1
    window = smooth_window if smooth_window is not None \
        else max(1, (all_eps + 1) // 100)
    lows = [(_smooth(g.mean - g.half_width, window)).min() for g in groups]
    highs = [(_smooth(g.mean + g.half_width, window)).max() for g in groups]
    ylim = (min(lows), max(highs))
    if ylim[0] == ylim[1]:
        ylim = (ylim[0] - 1.0, ylim[1] + 1.0)
    p1 = _Panel(70, 40, 460, 320, (0, max(all_eps, 1)), ylim)
    _axes(p1, "episode", "mean episodic reward", parts)
    for k, g in enumerate(groups):
        color = _COLORS[k % len(_COLORS)]
        xs = p1.px(g.episodes)
        mean_s = _smooth(g.mean, window)
        if g.seeds > 1:
            lo = _smooth(g.mean - g.half_width, window)
            hi = _smooth(g.mean + g.half_width, window)
            parts.append(_band(xs, p1.py(lo), p1.py(hi), color))
        parts.append(_polyline(xs, p1.py(mean_s), color))
        parts.append(_text(540 if not two_panels else 545, 56 + 16 * k,
                           f"{g.label} ({g.seeds} seed{'s' if g.seeds > 1 else ''})",
                           size=10))
        parts.append(f'<rect x="{530 if not two_panels else 535}" y="{48 + 16 * k}" '
                     f'width="8" height="8" fill="{color}"/>')

    # panel 2: final reward vs delay ratio
    if two_panels:
        algos = sorted({g.algorithm for g in groups})
        finals: dict[str, list[tuple[float, float, float]]] = {a: [] for a in algos}
        for g in groups:
            tail = max(1, len(g.mean) // 10)
            finals[g.algorithm].append(
                (g.ratio, float(g.mean[-tail:].mean()),
                 float(g.half_width[-tail:].mean())))
        values = [v for pts in finals.values() for (_, v, h) in pts]
        halves = [h for pts in finals.values() for (_, v, h) in pts]
        ylim2 = (min(v - h for v, h in zip(values, halves)),
                 max(v + h for v, h in zip(values, halves)))
        if ylim2[0] == ylim2[1]:
            ylim2 = (ylim2[0] - 1.0, ylim2[1] + 1.0)
        p2 = _Panel(740, 40, 200, 320, (min(ratios), max(ratios)), ylim2)
        _axes(p2, "mean delay ratio", "final reward", parts)
        for k, a in enumerate(algos):
            pts = sorted(finals[a])
            color = _COLORS[k % len(_COLORS)]
            xs = p2.px([p[0] for p in pts])
            ys = p2.py([p[1] for p in pts])
            parts.append(_polyline(xs, ys, color))
            for x, y in zip(np.atleast_1d(xs), np.atleast_1d(ys)):
                parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" '
                             f'fill="{color}"/>')

    parts.append("</svg>")
    out_path = Path(out_path)
    out_path.write_text("\n".join(parts), encoding="utf-8")
    return out_path
