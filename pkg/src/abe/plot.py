"""Log-scale line charts of summary MSE rows, written as plain SVG text."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .harness import read_csv

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _num(text: str) -> float | None:
    try:
        v = float(text)
    except (TypeError, ValueError):
        return None
    return v if math.isfinite(v) else None


def _f(v: float) -> str:
    return f"{v:.2f}"


def summary_series(rows: list[dict]) -> tuple[dict, dict]:
    """Empirical and predicted ``(x, mse)`` points keyed by ``estimator/loss``."""
    emp, theo = {}, {}
    for r in rows:
        if r.get("row_type") != "summary":
            raise_if_malformed(r)
            continue
        x = _num(r.get("sweep_value"))
        if x is None:
            raise ValueError("summary row without a numeric sweep_value")
        label = f"{r.get('estimator', '')}/{r.get('loss', '')}"
        y = _num(r.get("mse"))
        if y is not None and y > 0:
            emp.setdefault(label, []).append((x, y))
        t = _num(r.get("pred_mse_limit"))
        if t is not None and t > 0:
            theo.setdefault(label, []).append((x, t))
    for d in (emp, theo):
        for k in d:
            d[k].sort()
    return emp, theo


def raise_if_malformed(row: dict) -> None:
    if row.get("row_type") not in ("cell", "summary"):
        raise ValueError(f"malformed row: row_type={row.get('row_type')!r}")


def render_svg(emp: dict, theo: dict, title: str = "", xlabel: str = "sweep value") -> str:
    labels = sorted(set(emp) | set(theo))
    pts = [p for d in (emp, theo) for s in d.values() for p in s]
    if pts:
        xs = [p[0] for p in pts]
        ys = [math.log10(p[1]) for p in pts]
        x0, x1 = min(xs), max(xs)
        y0, y1 = math.floor(min(ys)), math.ceil(max(ys))
    else:
        x0, x1, y0, y1 = 0.0, 1.0, -1, 0
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    if y1 == y0:
        y1 = y0 + 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + (1.0 - (math.log10(y) - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-family="sans-serif" font-size="13">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for e in range(y0, y1 + 1):
        y = TOP + (1.0 - (e - y0) / (y1 - y0)) * ph
        out.append(f'<line x1="{LEFT - 4}" y1="{_f(y)}" x2="{LEFT + pw}" y2="{_f(y)}" stroke="#dddddd"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_f(y + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">1e{e}</text>')
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        out.append(f'<text x="{_f(sx(xv))}" y="{TOP + ph + 16}" text-anchor="middle" font-family="sans-serif" font-size="11">{xv:g}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2}" transform="rotate(-90 16 {TOP + ph / 2})" text-anchor="middle" font-family="sans-serif" font-size="12">MSE of log Z</text>')
    for i, label in enumerate(labels):
        color = PALETTE[i % len(PALETTE)]
        for series, dash in ((emp.get(label), ""), (theo.get(label), ' stroke-dasharray="5,4"')):
            if not series:
                continue
            path = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in series)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
            if not dash:
                for x, y in series:
                    out.append(f'<circle cx="{_f(sx(x))}" cy="{_f(sy(y))}" r="2.5" fill="{color}"/>')
        ly = TOP + 14 * i + 6
        out.append(f'<line x1="{LEFT + pw + 10}" y1="{ly}" x2="{LEFT + pw + 28}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{LEFT + pw + 32}" y="{ly + 4}" font-family="sans-serif" font-size="11">{escape(label)}</text>')
    if labels:
        ly = TOP + 14 * len(labels) + 10
        out.append(f'<text x="{LEFT + pw + 10}" y="{ly}" font-family="sans-serif" font-size="10">dashed: prediction</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(csv_path: str, out_svg: str, title: str | None = None) -> str:
    rows = read_csv(csv_path)
    emp, theo = summary_series(rows)
    experiment = rows[0].get("experiment", "") if rows else ""
    xlabel = {"sweep_dimension": "dimension", "sweep_distance": "natural-parameter distance"}.get(experiment, "sweep value")
    svg = render_svg(emp, theo, title if title is not None else experiment, xlabel)
    with open(out_svg, "w", encoding="utf-8", newline="") as fh:
        fh.write(svg)
    return svg
