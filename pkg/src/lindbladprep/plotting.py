"""CSV time-series IO and deterministic SVG line plots.

Plots are rendered straight from CSV files (never from in-memory state) by
a small hand-rolled SVG writer, so identical input bytes always produce
identical output bytes: no timestamps, no randomized ids, fixed float
formatting.  Each series draws a line plus a +/- 1 standard-error band
when an error column is present.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import SimulationRecord

__all__ = ["PlotError", "PLOT_KINDS", "write_timeseries_csv", "read_timeseries", "render_plot"]


class PlotError(ValueError):
    pass


# kind -> (x column, y column, y-error column, x label, y label)
PLOT_KINDS = {
    "energy-time": ("time", "energy_mean", "energy_se", "Lindblad time", "energy"),
    "overlap-time": ("time", "overlap_mean", "overlap_se", "Lindblad time", "ground overlap"),
    "energy-htime": ("h_time", "energy_mean", "energy_se", "Hamiltonian simulation time", "energy"),
    "overlap-htime": (
        "h_time",
        "overlap_mean",
        "overlap_se",
        "Hamiltonian simulation time",
        "ground overlap",
    ),
}

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_timeseries_csv(record: SimulationRecord, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SimulationRecord.COLUMNS)
        for row in record.rows():
            writer.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def read_timeseries(path: str | Path, columns=SimulationRecord.COLUMNS) -> dict:
    """Load a run CSV; missing columns or an empty table are errors."""
    path = Path(path)
    if not path.exists():
        raise PlotError(f"no such CSV: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise PlotError(f"{path}: empty CSV")
        missing = [c for c in columns if c not in reader.fieldnames]
        if missing:
            raise PlotError(f"{path}: missing column(s) {missing}")
        rows = list(reader)
    if not rows:
        raise PlotError(f"{path}: no data rows")
    out = {}
    for c in reader.fieldnames:
        out[c] = np.array([float(r[c]) for r in rows])
    return out


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    raw = span / max(target - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _num(x: float) -> str:
    return f"{x:.6g}"


@dataclass
class _Frame:
    x0: float = 72.0
    y0: float = 48.0
    width: float = 520.0
    height: float = 360.0

    def map_x(self, v, lo, hi):
        return self.x0 + (v - lo) / (hi - lo) * self.width

    def map_y(self, v, lo, hi):
        return self.y0 + self.height - (v - lo) / (hi - lo) * self.height


def render_plot(
    csv_paths: list[str | Path],
    kind: str,
    out_path: str | Path,
    labels: list[str] | None = None,
) -> None:
    """Render one plot kind for one or more run CSVs onto a single canvas."""
    if kind not in PLOT_KINDS:
        raise PlotError(f"unknown plot kind {kind!r}; choose from {sorted(PLOT_KINDS)}")
    xcol, ycol, ecol, xlabel, ylabel = PLOT_KINDS[kind]
    series = [read_timeseries(p) for p in csv_paths]
    if labels is None:
        labels = [Path(p).stem for p in csv_paths]
    if len(labels) != len(series):
        raise PlotError("one label per CSV required")

    xs = np.concatenate([s[xcol] for s in series])
    ys = np.concatenate(
        [np.concatenate([s[ycol] - s[ecol], s[ycol] + s[ecol]]) for s in series]
    )
    xlo, xhi = float(xs.min()), float(xs.max())
    ylo, yhi = float(ys.min()), float(ys.max())
    if xhi == xlo:
        xhi = xlo + 1.0
    pad = 0.05 * (yhi - ylo) if yhi > ylo else 0.5
    ylo, yhi = ylo - pad, yhi + pad

    fr = _Frame()
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" width="660" height="470" '
        'viewBox="0 0 660 470" font-family="sans-serif" font-size="12">',
        '<rect x="0" y="0" width="660" height="470" fill="white"/>',
        f'<rect x="{_num(fr.x0)}" y="{_num(fr.y0)}" width="{_num(fr.width)}" '
        f'height="{_num(fr.height)}" fill="none" stroke="black"/>',
    ]
    for t in _nice_ticks(xlo, xhi):
        px = fr.map_x(t, xlo, xhi)
        parts.append(
            f'<line x1="{_num(px)}" y1="{_num(fr.y0 + fr.height)}" x2="{_num(px)}" '
            f'y2="{_num(fr.y0 + fr.height + 5)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_num(px)}" y="{_num(fr.y0 + fr.height + 18)}" '
            f'text-anchor="middle">{_num(t)}</text>'
        )
    for t in _nice_ticks(ylo, yhi):
        py = fr.map_y(t, ylo, yhi)
        parts.append(
            f'<line x1="{_num(fr.x0 - 5)}" y1="{_num(py)}" x2="{_num(fr.x0)}" '
            f'y2="{_num(py)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_num(fr.x0 - 8)}" y="{_num(py + 4)}" text-anchor="end">{_num(t)}</text>'
        )
    parts.append(
        f'<text x="{_num(fr.x0 + fr.width / 2)}" y="456" text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{_num(fr.y0 + fr.height / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_num(fr.y0 + fr.height / 2)})">{ylabel}</text>'
    )

    for i, (s, label) in enumerate(zip(series, labels)):
        color = _PALETTE[i % len(_PALETTE)]
        x = s[xcol]
        y = s[ycol]
        err = s[ecol]
        if np.any(err > 0):
            upper = [(fr.map_x(a, xlo, xhi), fr.map_y(b + e, ylo, yhi)) for a, b, e in zip(x, y, err)]
            lower = [(fr.map_x(a, xlo, xhi), fr.map_y(b - e, ylo, yhi)) for a, b, e in zip(x, y, err)]
            pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in upper + lower[::-1])
            parts.append(f'<polygon points="{pts}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(
            f"{_num(fr.map_x(a, xlo, xhi))},{_num(fr.map_y(b, ylo, yhi))}" for a, b in zip(x, y)
        )
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = fr.y0 + 16 + 16 * i
        parts.append(
            f'<line x1="{_num(fr.x0 + fr.width - 150)}" y1="{_num(ly - 4)}" '
            f'x2="{_num(fr.x0 + fr.width - 126)}" y2="{_num(ly - 4)}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(f'<text x="{_num(fr.x0 + fr.width - 120)}" y="{_num(ly)}">{label}</text>')

    parts.append("</svg>")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(("\n".join(parts) + "\n").encode("utf-8"))
