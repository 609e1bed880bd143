"""CSV and SVG emission of sweep rows."""
from __future__ import annotations

import csv
import io
from html import escape
from pathlib import Path

from .sweep import DIGITS, ResultRow

__all__ = ["HEADER", "PALETTE", "format_csv", "emit_csv", "parse_csv", "read_csv", "render_svg", "emit_svg"]

HEADER = ("swept_param", "value", "scenario", "scheme", "mode", "throughput", "std_error", "lambda", "rates", "ms")

# fixed series colors, assigned in order of first appearance
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
)


def _num(x) -> str:
    return "" if x is None else f"{x:.{DIGITS}g}"


def _vec(xs) -> str:
    return ";".join(_num(x) for x in xs)


def format_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for r in rows:
        writer.writerow([
            r.swept_param, _num(r.value), r.scenario, r.scheme, r.mode, _num(r.throughput),
            _num(r.std_error), _vec(r.lam), _vec(r.rates), _num(r.ms),
        ])
    return buf.getvalue()


def emit_csv(rows, path) -> None:
    """Write rows as CSV; ``OSError`` carries the path."""
    Path(path).write_text(format_csv(rows), encoding="utf-8", newline="")


def _opt(field: str):
    return float(field) if field else None


def _opt_vec(field: str) -> tuple:
    return tuple(float(x) for x in field.split(";")) if field else ()


def parse_csv(text: str) -> list[ResultRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    rows = []
    for number, rec in enumerate(reader, start=2):
        if len(rec) != len(HEADER):
            raise ValueError(f"line {number}: expected {len(HEADER)} fields, got {len(rec)}")
        param, value, scenario, scheme, mode, thr, err, lam, rates, ms = rec
        rows.append(ResultRow(
            param, float(value), scenario, scheme, mode, _opt(thr), _opt(err), _opt_vec(lam), _opt_vec(rates), _opt(ms),
        ))
    return rows


def read_csv(path) -> list[ResultRow]:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


_AXIS_LABEL = {"p": "p", "alpha": "alpha", "C": "C [bit/use]", "dC": "dC [bit/use]", "P_db": "P [dB]"}


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_svg(rows, width: int = 640, height: int = 420, title: str | None = None) -> str:
    """A line chart with one series per (scheme, mode) and a legend.

    Axes span the data with 5% margins on each side; skipped points break
    nothing, they are simply absent from their series.
    """
    series: dict = {}
    for r in rows:
        series.setdefault((r.scheme, r.mode), [])
        if not r.skipped:
            series[(r.scheme, r.mode)].append((r.value, r.throughput))
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    left, right, top, bottom = 64, 190, 30, 48
    pw, ph = width - left - right, height - top - bottom
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    if xs:
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        dx = (x1 - x0) or max(abs(x0), 1.0)
        dy = (y1 - y0) or max(abs(y0), 1.0)
        x0, x1 = x0 - 0.05 * dx, x1 + 0.05 * dx
        y0, y1 = y0 - 0.05 * dy, y1 + 0.05 * dy

        def sx(x):
            return left + (x - x0) / (x1 - x0) * pw

        def sy(y):
            return top + ph - (y - y0) / (y1 - y0) * ph

        out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
        for t in _ticks(x0, x1):
            out.append(f'<line x1="{sx(t):.2f}" y1="{top + ph}" x2="{sx(t):.2f}" y2="{top + ph + 4}" stroke="black"/>')
            out.append(f'<text x="{sx(t):.2f}" y="{top + ph + 16}" text-anchor="middle">{t:.3g}</text>')
        for t in _ticks(y0, y1):
            out.append(f'<line x1="{left - 4}" y1="{sy(t):.2f}" x2="{left}" y2="{sy(t):.2f}" stroke="black"/>')
            out.append(f'<text x="{left - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:.3g}</text>')
        param = rows[0].swept_param
        out.append(
            f'<text x="{left + pw / 2:.2f}" y="{height - 10}" text-anchor="middle">'
            f"{escape(_AXIS_LABEL.get(param, param))}</text>"
        )
        out.append(
            f'<text x="16" y="{top + ph / 2:.2f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {top + ph / 2:.2f})">average throughput [bit/use]</text>'
        )
    for i, ((scheme, mode), pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        if len(pts) > 1:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2" fill="{color}"/>')
        ly = top + 8 + 16 * i
        lx = left + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(scheme)} / {escape(mode)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(rows, path, title: str | None = None) -> None:
    Path(path).write_text(render_svg(rows, title=title), encoding="utf-8")
