"""Self-contained SVG charts for sweeps and tradeoff curves."""

from __future__ import annotations

import math
from collections import defaultdict
from xml.sax.saxutils import escape

from .frlp import TABLE_C, TABLE_R
from .numerics import BALANCE_RATIO

WIDTH, HEIGHT = 640, 480
MARGIN = 60
X_RANGE = (0.0, 1.0)
Y_RANGE = (0.0, 1.05)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _px(x: float, y: float) -> tuple[float, float]:
    sx = MARGIN + (x - X_RANGE[0]) / (X_RANGE[1] - X_RANGE[0]) * (WIDTH - 2 * MARGIN)
    sy = HEIGHT - MARGIN - (y - Y_RANGE[0]) / (Y_RANGE[1] - Y_RANGE[0]) * (HEIGHT - 2 * MARGIN)
    return sx, sy


def _pts(xy) -> str:
    return " ".join("%.2f,%.2f" % _px(x, y) for x, y in xy)


def _axes(xlabel: str, ylabel: str) -> list[str]:
    x0, y0 = _px(X_RANGE[0], Y_RANGE[0])
    x1, y1 = _px(X_RANGE[1], Y_RANGE[1])
    out = [f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y0:.2f}" stroke="black"/>',
           f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x0:.2f}" y2="{y1:.2f}" stroke="black"/>']
    for i in range(6):
        t = i / 5
        sx, _ = _px(t, 0.0)
        out.append(f'<text x="{sx:.2f}" y="{y0 + 18:.2f}" font-size="11" text-anchor="middle">{t:.1f}</text>')
        _, sy = _px(0.0, t)
        out.append(f'<text x="{x0 - 8:.2f}" y="{sy + 4:.2f}" font-size="11" text-anchor="end">{t:.1f}</text>')
    out.append(f'<text x="{WIDTH / 2:.2f}" y="{HEIGHT - 15}" font-size="13" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{HEIGHT / 2:.2f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 15 {HEIGHT / 2:.2f})">{escape(ylabel)}</text>')
    return out


def _legend(labels) -> list[str]:
    out = []
    for i, (label, color) in enumerate(labels):
        y = MARGIN + 10 + 16 * i
        x = WIDTH - MARGIN - 170
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x + 26}" y="{y + 4}" font-size="11">{escape(label)}</text>')
    return out


def _wrap(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">')
    return "\n".join([head] + body + ["</svg>"]) + "\n"


def _series_label(alg: str, lam: str) -> str:
    return alg if lam in ("", None) else f"{alg} lambda={float(lam):.4f}"


def _sweep_chart(rows) -> str:
    groups = defaultdict(lambda: defaultdict(list))
    for row in rows:
        ratio = float(row["ratio"])
        if math.isnan(ratio):
            continue
        key = (row["algorithm"], float(row["lambda"]) if row["lambda"] not in ("", None) else -1.0)
        groups[key][float(row["gamma"])].append(ratio)
    if not groups:
        raise ValueError("no finite ratios to plot")
    body = _axes("noise gamma", "ALG / OPT")
    labels = []
    for i, key in enumerate(sorted(groups)):
        color = PALETTE[i % len(PALETTE)]
        cells = groups[key]
        gammas = sorted(cells)
        mean = [(g, sum(cells[g]) / len(cells[g])) for g in gammas]
        band = [(g, min(cells[g])) for g in gammas] + [(g, max(cells[g])) for g in reversed(gammas)]
        body.append(f'<polygon points="{_pts(band)}" fill="{color}" fill-opacity="0.15" stroke="none"/>')
        body.append(f'<polyline points="{_pts(mean)}" fill="none" stroke="{color}" stroke-width="2"/>')
        for g, m in mean:
            sx, sy = _px(g, m)
            body.append(f'<circle cx="{sx:.2f}" cy="{sy:.2f}" r="2.5" fill="{color}"/>')
        lam = "" if key[1] < 0 else key[1]
        labels.append((_series_label(key[0], lam), color))
    return _wrap(body + _legend(labels))


def _curve_chart(rows) -> str:
    groups = defaultdict(list)
    for row in rows:
        groups[row.get("algorithm") or "curve"].append((float(row["lambda"]), float(row["r"]), float(row["c"])))
    if not groups:
        raise ValueError("no curve points to plot")
    body = _axes("robustness r", "consistency c")
    labels = []
    coin = [((0.0, 1.0), (BALANCE_RATIO, BALANCE_RATIO)), ((0.5, 1.0), (BALANCE_RATIO, BALANCE_RATIO))]
    for a, b in coin:
        body.append(f'<polyline points="{_pts([a, b])}" fill="none" stroke="#7f7f7f" '
                    f'stroke-dasharray="5,4" stroke-width="1.5"/>')
    labels.append(("coin flip", "#7f7f7f"))
    for r, c in zip(TABLE_R, TABLE_C):
        sx, sy = _px(r, c)
        body.append(f'<rect x="{sx - 3:.2f}" y="{sy - 3:.2f}" width="6" height="6" fill="black"/>')
    labels.append(("upper bound points", "black"))
    for i, alg in enumerate(sorted(groups)):
        color = PALETTE[i % len(PALETTE)]
        pts = [(r, c) for _, r, c in sorted(groups[alg])]
        body.append(f'<polyline points="{_pts(pts)}" fill="none" stroke="{color}" stroke-width="2"/>')
        labels.append((alg, color))
    return _wrap(body + _legend(labels))


def emit_chart(rows, style: str = "sweep") -> str:
    """SVG text for sweep rows or ``(algorithm, lambda, r, c)`` curve rows.

    Rows are mappings keyed by CSV column names.  Output depends only on
    the rows, so identical input gives byte-identical SVG.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("cannot chart empty data")
    if style == "sweep":
        return _sweep_chart(rows)
    if style == "curve":
        return _curve_chart(rows)
    raise ValueError(f"unknown chart style {style!r}")
