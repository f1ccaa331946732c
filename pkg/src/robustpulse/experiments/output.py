"""Result files: CSV tables, JSON metadata sidecars and plain SVG charts."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, is_dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .. import __version__


def artifact_stem(experiment: str, seed: int, timestamp: str | None = None) -> str:
    """``<experiment>_<timestamp>_<seed>``; the timestamp is UTC to the second."""
    stamp = timestamp or time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
    return f"{experiment}_{stamp}_{seed}"


def _plain(value):
    if is_dataclass(value) and not isinstance(value, type):
        return _plain(asdict(value))
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_csv(path) -> tuple[list, list]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_metadata(path, experiment: str, config, seeds, extra=None) -> Path:
    """JSON sidecar holding everything needed to re-run an experiment."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "experiment": experiment,
        "package_version": __version__,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "config": _plain(config),
        "seeds": _plain(seeds),
    }
    if extra:
        doc["results"] = _plain(extra)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


# --------------------------------------------------------------------------
# SVG

_W, _H = 640, 420
_M = dict(left=80, right=20, top=30, bottom=60)
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f")


def _scale(lo, hi, a, b, log=False):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    span = (hi - lo) or 1.0

    def f(v):
        v = math.log10(v) if log else v
        return a + (v - lo) / span * (b - a)
    return f


def _ticks(lo, hi, log=False, n=5):
    if log:
        return [10.0**k for k in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1)]
    return list(np.linspace(lo, hi, n))


def _fmt(v):
    return f"{v:.0e}" if (abs(v) < 1e-2 or abs(v) >= 1e4) and v != 0 else f"{v:.3g}"


def line_chart_svg(path, series: dict, xlabel: str, ylabel: str, title: str = "",
                   logy: bool = False) -> Path:
    """``series`` maps a legend label to ``(x, y)`` arrays."""
    xs = np.concatenate([np.asarray(x, float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, float) for _, y in series.values()])
    if logy:
        ys = ys[ys > 0]
    xlo, xhi = float(xs.min()), float(xs.max())
    ylo, yhi = (float(ys.min()), float(ys.max())) if ys.size else (1e-12, 1.0)
    if logy:
        ylo, yhi = 10 ** math.floor(math.log10(ylo)), 10 ** math.ceil(math.log10(yhi))
    fx = _scale(xlo, xhi, _M["left"], _W - _M["right"])
    fy = _scale(ylo, yhi, _H - _M["bottom"], _M["top"], log=logy)
    out = [_svg_open(title)]
    out.append(_axes(fx, fy, _ticks(xlo, xhi), _ticks(ylo, yhi, logy), xlabel, ylabel))
    for i, (label, (x, y)) in enumerate(series.items()):
        pts = [(fx(a), fy(b)) for a, b in zip(np.asarray(x, float), np.asarray(y, float))
               if not logy or b > 0]
        color = _COLORS[i % len(_COLORS)]
        d = " ".join(f"{px:.1f},{py:.1f}" for px, py in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{d}"/>')
        out.append(f'<text x="{_W - _M["right"] - 150}" y="{_M["top"] + 14 * (i + 1)}" '
                   f'fill="{color}" font-size="11">{escape(str(label))}</text>')
    out.append("</svg>")
    return _write(path, out)


def heatmap_svg(path, values, xlabels, ylabels, xlabel: str, ylabel: str,
                title: str = "", log: bool = True) -> Path:
    """Grid of coloured cells; ``values[i, j]`` sits at row ``ylabels[i]``."""
    v = np.asarray(values, float)
    finite = v[np.isfinite(v) & ((v > 0) if log else True)]
    lo, hi = (finite.min(), finite.max()) if finite.size else (1.0, 1.0)
    f = (lambda z: (math.log10(z) - math.log10(lo)) / ((math.log10(hi) - math.log10(lo)) or 1)) \
        if log else (lambda z: (z - lo) / ((hi - lo) or 1))
    nr, nc = v.shape
    cw = (_W - _M["left"] - _M["right"]) / nc
    ch = (_H - _M["top"] - _M["bottom"]) / nr
    out = [_svg_open(title)]
    for i in range(nr):
        for j in range(nc):
            z = v[i, j]
            ok = np.isfinite(z) and (z > 0 or not log)
            t = min(max(f(z), 0.0), 1.0) if ok else None
            color = "#cccccc" if t is None else _viridis_like(t)
            x = _M["left"] + j * cw
            y = _H - _M["bottom"] - (i + 1) * ch
            out.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{cw:.1f}" height="{ch:.1f}" '
                       f'fill="{color}"><title>{escape(_fmt(z) if ok else "nan")}</title></rect>')
    for j, lab in enumerate(xlabels):
        out.append(f'<text x="{_M["left"] + (j + 0.5) * cw:.1f}" y="{_H - _M["bottom"] + 16}" '
                   f'font-size="11" text-anchor="middle">{escape(str(lab))}</text>')
    for i, lab in enumerate(ylabels):
        out.append(f'<text x="{_M["left"] - 6}" y="{_H - _M["bottom"] - (i + 0.5) * ch:.1f}" '
                   f'font-size="11" text-anchor="end">{escape(str(lab))}</text>')
    out.append(_labels(xlabel, ylabel))
    out.append(f'<text x="{_W - _M["right"]}" y="{_M["top"] - 8}" font-size="10" '
               f'text-anchor="end">range {_fmt(lo)} .. {_fmt(hi)}</text>')
    out.append("</svg>")
    return _write(path, out)


def _viridis_like(t: float) -> str:
    # dark blue -> teal -> yellow
    stops = [(68, 1, 84), (33, 145, 140), (253, 231, 37)]
    k = min(int(t * 2), 1)
    u = t * 2 - k
    c = [round(a + (b - a) * u) for a, b in zip(stops[k], stops[k + 1])]
    return "#%02x%02x%02x" % tuple(c)


def _svg_open(title: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'font-family="sans-serif"><rect width="100%" height="100%" fill="white"/>')
    if title:
        head += (f'<text x="{_W / 2}" y="18" font-size="13" text-anchor="middle">'
                 f'{escape(title)}</text>')
    return head


def _labels(xlabel: str, ylabel: str) -> str:
    return (f'<text x="{(_M["left"] + _W - _M["right"]) / 2}" y="{_H - 15}" font-size="12" '
            f'text-anchor="middle">{escape(xlabel)}</text>'
            f'<text x="16" y="{(_M["top"] + _H - _M["bottom"]) / 2}" font-size="12" '
            f'text-anchor="middle" transform="rotate(-90 16 '
            f'{(_M["top"] + _H - _M["bottom"]) / 2})">{escape(ylabel)}</text>')


def _axes(fx, fy, xticks, yticks, xlabel, ylabel) -> str:
    x0, x1 = _M["left"], _W - _M["right"]
    y0, y1 = _H - _M["bottom"], _M["top"]
    parts = [f'<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" stroke="black" fill="none"/>']
    for t in xticks:
        px = fx(t)
        parts.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y0 + 4}" stroke="black"/>'
                     f'<text x="{px:.1f}" y="{y0 + 16}" font-size="10" '
                     f'text-anchor="middle">{_fmt(t)}</text>')
    for t in yticks:
        py = fy(t)
        parts.append(f'<line x1="{x0 - 4}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="black"/>'
                     f'<text x="{x0 - 6}" y="{py + 3:.1f}" font-size="10" '
                     f'text-anchor="end">{_fmt(t)}</text>')
    parts.append(_labels(xlabel, ylabel))
    return "".join(parts)


def _write(path, parts) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
    return path
