"""Self-contained SVG learning curves from ``episodes.csv`` files."""
from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
WIDTH, HEIGHT = 760, 420
MARGIN = {"left": 64, "right": 170, "top": 36, "bottom": 52}


class PlotError(Exception):
    pass


def read_rewards(path) -> np.ndarray:
    path = Path(path)
    try:
        with path.open(encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
        rewards = np.array([float(r["raw_reward"]) for r in rows])
    except (OSError, KeyError, ValueError, csv.Error) as exc:
        raise PlotError(f"cannot read episode rewards from {path}: {exc}") from exc
    if rewards.size == 0:
        raise PlotError(f"{path} has no episodes")
    return rewards


def moving_average(values, window: int) -> np.ndarray:
    """Trailing mean over up to ``window`` values (shorter at the start)."""
    values = np.asarray(values, dtype=np.float64)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(1, values.size + 1)
    lo = np.maximum(idx - window, 0)
    out = (csum[idx] - csum[lo]) / (idx - lo)
    # exact for constant runs, where cumulative sums may round
    const = np.array([np.all(values[a:b] == values[b - 1]) for a, b in zip(lo, idx)])
    out[const] = values[idx[const] - 1]
    return out


def _polyline(xs, ys, color, width, opacity, cls):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return (f'<polyline class="{cls}" fill="none" stroke="{color}" stroke-width="{width}" '
            f'stroke-opacity="{opacity}" points="{pts}"/>')


def render_svg(series: dict[str, np.ndarray], window: int = 20, title: str = "Learning curves") -> str:
    n_max = max(len(v) for v in series.values())
    y_lo = min(0.0, min(float(v.min()) for v in series.values()))
    y_hi = max(1.0, max(float(v.max()) for v in series.values()))
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(i):
        return MARGIN["left"] + (i - 1) / max(n_max - 1, 1) * pw

    def sy(v):
        return MARGIN["top"] + (1.0 - (v - y_lo) / (y_hi - y_lo)) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]
    # axes, ticks, labels
    x0, x1 = MARGIN["left"], MARGIN["left"] + pw
    y0, y1 = MARGIN["top"] + ph, MARGIN["top"]
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for v in np.linspace(y_lo, y_hi, 6):
        y = sy(v)
        parts.append(f'<line x1="{x0 - 4}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8}" y="{y + 4:.2f}" text-anchor="end">{v:.2f}</text>')
    for i in np.unique(np.linspace(1, n_max, min(n_max, 6)).round().astype(int)):
        x = sx(i)
        parts.append(f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + 4}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{y0 + 18}" text-anchor="middle">{i}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">Episode</text>')
    parts.append(f'<text transform="translate(18 {(y0 + y1) / 2:.1f}) rotate(-90)" '
                 f'text-anchor="middle">Episode reward</text>')

    for k, (name, rewards) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        xs = [sx(i) for i in range(1, len(rewards) + 1)]
        parts.append(_polyline(xs, [sy(v) for v in rewards], color, 1, 0.35, "raw"))
        smooth = moving_average(rewards, window)
        parts.append(_polyline(xs, [sy(v) for v in smooth], color, 2.5, 1.0, "smoothed"))
        ly = MARGIN["top"] + 10 + 20 * k
        lx = x1 + 16
        parts.append(f'<g class="legend-entry"><line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2.5"/>'
                     f'<text x="{lx + 28}" y="{ly + 4}">{escape(name)}</text></g>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def plot(csv_paths, out_svg, smoothing_window: int = 20, title: str = "Learning curves") -> Path:
    """Raw (thin) and moving-average (thick) reward curves, one colour per file."""
    if not csv_paths:
        raise PlotError("no input CSV files")
    series = {}
    for p in csv_paths:
        name = Path(p).stem
        if name == "episodes":  # runs/<name>/episodes.csv -> use the run directory name
            name = Path(p).parent.name or name
        base, k = name, 2
        while name in series:
            name = f"{base} ({k})"
            k += 1
        series[name] = read_rewards(p)
    out_svg = Path(out_svg)
    out_svg.parent.mkdir(parents=True, exist_ok=True)
    out_svg.write_text(render_svg(series, smoothing_window, title), encoding="utf-8", newline="\n")
    return out_svg
