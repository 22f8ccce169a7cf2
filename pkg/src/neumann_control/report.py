"""CSV, JSON and SVG output of convergence reports."""
from __future__ import annotations

import csv
import io
import json
import math
import numbers
from pathlib import Path

from .benchmark import COLUMNS, ConvergenceReport
from .errors import ConfigurationError

CURVES = (("err_u", "#1f77b4"), ("err_y", "#2ca02c"), ("err_p", "#d62728"))
REFERENCE_SLOPES = (2.0, 1.16)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, numbers.Integral):
        return str(int(value))
    return repr(float(value))


def report_to_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in report.rows:
        writer.writerow([_fmt(row.get(c)) for c in COLUMNS])
    return buf.getvalue()


def report_from_csv(text: str, omega: float = math.nan, mu: float = math.nan) -> ConvergenceReport:
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        row = {}
        for c in COLUMNS:
            v = rec[c]
            if c in ("level", "ndof_domain", "nedges_boundary"):
                row[c] = int(v)
            else:
                row[c] = float(v) if v != "" else None
        rows.append(row)
    return ConvergenceReport(omega, mu, rows)


def report_to_json(report: ConvergenceReport) -> str:
    payload = {
        "omega": report.omega,
        "mu": report.mu,
        "columns": COLUMNS,
        "rows": [{c: row.get(c) for c in COLUMNS} for row in report.rows],
    }
    return json.dumps(payload, indent=1)


def report_from_json(text: str) -> ConvergenceReport:
    payload = json.loads(text)
    if payload.get("columns") != COLUMNS:
        raise ConfigurationError("unexpected report columns")
    return ConvergenceReport(payload["omega"], payload["mu"], payload["rows"])


def report_to_svg(report: ConvergenceReport, width: int = 480, height: int = 360) -> str:
    """Log-log error versus h: one path per error curve plus reference slopes."""
    hs = [r["h"] for r in report.rows]
    errs = [r[k] for r in report.rows for k, _ in CURVES]
    lx0, lx1 = math.log10(min(hs)), math.log10(max(hs))
    ly0, ly1 = math.log10(min(errs)), math.log10(max(errs))
    if lx1 == lx0:
        lx1 = lx0 + 1.0
    if ly1 == ly0:
        ly1 = ly0 + 1.0
    pad = 40

    def xy(h, e):
        x = pad + (math.log10(h) - lx0) / (lx1 - lx0) * (width - 2 * pad)
        y = height - pad - (math.log10(e) - ly0) / (ly1 - ly0) * (height - 2 * pad)
        return f"{x:.2f},{y:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
           'fill="none" stroke="#888"/>']
    for key, color in CURVES:
        pts = " L ".join(xy(r["h"], r[key]) for r in report.rows)
        out.append(f'<path id="{key}" d="M {pts}" fill="none" stroke="{color}"/>')
    # reference slopes anchored at the coarsest err_u
    h0, e0 = hs[0], report.rows[0]["err_u"]
    for slope in REFERENCE_SLOPES:
        e1 = e0 * (hs[-1] / h0) ** slope
        out.append(f'<path id="slope_{slope:g}" d="M {xy(h0, e0)} L {xy(hs[-1], e1)}" '
                   'fill="none" stroke="#000" stroke-dasharray="4 3"/>')
    out.append(f'<text x="{pad}" y="{pad - 8}" font-size="12">error vs h, omega={report.omega:.4f}, '
               f'mu={report.mu:g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(report: ConvergenceReport, path, fmt: str = "csv") -> Path:
    if not report.rows:
        raise ConfigurationError("empty report")
    writers = {"csv": report_to_csv, "json": report_to_json, "svg": report_to_svg}
    if fmt not in writers:
        raise ConfigurationError(f"unknown report format {fmt!r}")
    path = Path(path)
    path.write_text(writers[fmt](report))
    return path
