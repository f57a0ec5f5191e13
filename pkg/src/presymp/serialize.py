"""Text formats for forms, embeddings and verification reports.

Form tables are one line per nonzero coefficient, keys in increasing chart
order::

    (x1,y1): 1 + p1
    (x1,p1): y1
    (z1,p1): -1

Reports come in two flavours: aligned human-readable text, and
newline-delimited JSON with the fixed field order
name, status, residual, tolerance, samples, seed, note.
"""

from __future__ import annotations

import json
import math
import re

from .expr import Chart, parse, to_string
from .forms import KForm, SmoothMap
from .verify import VerificationReport

__all__ = [
    "format_number",
    "format_form",
    "parse_form",
    "format_embedding",
    "format_report_text",
    "format_report_jsonl",
]

_LINE = re.compile(r"^\(([^)]*)\)\s*:\s*(.+)$")


def format_number(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def format_form(form: KForm) -> str:
    names = form.chart.names
    lines = []
    for key, coeff in form.items():
        lines.append(f"({','.join(names[i] for i in key)}): {to_string(coeff)}")
    return "\n".join(lines)


def parse_form(text: str, chart: Chart, degree: int = 2) -> KForm:
    """Inverse of :func:`format_form`.  Blank lines and ``#`` comments are skipped."""
    terms = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _LINE.match(line)
        if not match:
            raise ValueError(f"line {lineno}: expected '(i,j,...): expression'")
        names = [s.strip() for s in match.group(1).split(",") if s.strip()]
        if len(names) != degree:
            raise ValueError(f"line {lineno}: expected {degree} coordinates")
        try:
            key = tuple(chart.index(n) for n in names)
        except KeyError as exc:
            raise ValueError(f"line {lineno}: unknown coordinate {exc.args[0]!r}") from None
        if list(key) != sorted(set(key)):
            raise ValueError(f"line {lineno}: coordinates must be in increasing chart order")
        if key in terms:
            raise ValueError(f"line {lineno}: duplicate entry")
        terms[key] = parse(match.group(2), chart)
    return KForm(chart, degree, terms)


def format_embedding(f: SmoothMap) -> str:
    """Momentum components of an embedding into the cotangent chart."""
    lines = []
    for coord, expr in zip(f.target.coordinates, f.components):
        if coord.role in ("px", "py", "pz"):
            lines.append(f"{coord.name} = {to_string(expr)}")
    return "\n".join(lines)


def format_report_text(report: VerificationReport) -> str:
    width = max((len(r.name) for r in report.records), default=0)
    lines = []
    for r in report.records:
        lines.append(
            f"{r.status.upper():4}  {r.name:<{width}}  residual={format_number(r.residual)}"
            f"  tol={format_number(r.tolerance)}  samples={r.samples}  seed={r.seed}"
            + (f"  # {r.note}" if r.note else "")
        )
    failed = len(report.failures())
    lines.append(f"{len(report.records)} checks, {failed} failed")
    return "\n".join(lines)


def format_report_jsonl(report: VerificationReport) -> str:
    lines = []
    for r in report.records:
        fields = [
            ("name", json.dumps(r.name)),
            ("status", json.dumps(r.status)),
            ("residual", _json_number(r.residual)),
            ("tolerance", _json_number(r.tolerance)),
            ("samples", str(r.samples)),
            ("seed", str(r.seed)),
            ("note", json.dumps(r.note)),
        ]
        lines.append("{" + ", ".join(f'"{k}": {v}' for k, v in fields) + "}")
    return "\n".join(lines) + "\n"


def _json_number(x: float) -> str:
    if math.isfinite(x):
        return format_number(x)
    return json.dumps(format_number(x))
