#!/usr/bin/env python3
"""Markdown summary of gndline CSV tables.

Reads FRC CSVs (``frequency_hz,magnitude,phase_rad``) and sweep CSVs
(``x,output_metric,deviation``) and writes one table row per file: row count,
x span, argmax, relative span of the value column, and whether the value is
nondecreasing over the first decade of x.

Stdlib-only; it does not import the simulator.

Usage:
    python tools/frc_report.py \
        --inputs out/frc_coupling.csv out/frc_conversion.csv out/sweep.csv \
        --report docs/frc_report.md
"""
import argparse
import csv
import os

_VALUE_COLUMNS = ("magnitude", "deviation")


def load_table(path: str) -> tuple[list[str], list[dict]]:
    """Header and rows of a CSV, skipping ``#`` comment lines; values parsed as floats."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    reader = csv.DictReader(lines)
    rows = []
    for raw in reader:
        row = {}
        for key, value in raw.items():
            try:
                row[key] = float(value)
            except (TypeError, ValueError):
                row[key] = value
        rows.append(row)
    return list(reader.fieldnames or []), rows


def _columns(header: list[str]) -> tuple[str, str]:
    x = "frequency_hz" if "frequency_hz" in header else "x"
    for name in _VALUE_COLUMNS:
        if name in header:
            return x, name
    raise ValueError(f"no value column in header {header!r}")


def summarize(header: list[str], rows: list[dict]) -> dict:
    x_col, y_col = _columns(header)
    pts = [(r[x_col], r[y_col]) for r in rows
           if isinstance(r.get(x_col), float) and isinstance(r.get(y_col), float)]
    if not pts:
        return {"rows": 0, "column": y_col}
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    top = max(ys)
    argmax = xs[ys.index(top)]
    low = min(ys)
    # First decade of x, or the whole table for a linear amplitude axis starting at 0.
    edge = xs[0] * 10 if xs[0] > 0 else xs[-1]
    decade = [y for x, y in pts if x <= edge]
    return {
        "rows": len(pts),
        "column": y_col,
        "x_min": xs[0],
        "x_max": xs[-1],
        "argmax": argmax,
        "max": top,
        "min": low,
        "relative_span": (top - low) / top if top else 0.0,
        "low_decade_monotonic": all(b >= a for a, b in zip(decade, decade[1:])),
    }


def render_markdown(summaries: dict) -> str:
    cols = ["file", "column", "rows", "x_min", "x_max", "argmax", "max", "relative_span",
            "low_decade_monotonic"]

    def fmt(v):
        if v is None:
            return "n/a"
        if isinstance(v, bool):
            return "yes" if v else "no"
        return f"{v:.4g}" if isinstance(v, float) else str(v)

    lines = ["# gndline FRC Report", ""]
    lines.append("| " + " | ".join(cols) + " |")
    lines.append("| " + " | ".join(["---"] * len(cols)) + " |")
    for name, s in summaries.items():
        row = [name] + [fmt(s.get(c)) for c in cols[1:]]
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    lines.append("_relative_span is (max - min) / max of the value column; "
                 "low_decade_monotonic checks the first decade of x._")
    return "\n".join(lines) + "\n"


def write_report(report: str, path: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(report)


def main(argv=None):
    parser = argparse.ArgumentParser()
    parser.add_argument("--inputs", nargs="+", required=True, help="FRC or sweep CSV files")
    parser.add_argument("--report", default="docs/frc_report.md")
    args = parser.parse_args(argv)

    summaries = {}
    for path in args.inputs:
        header, rows = load_table(path)
        summaries[os.path.basename(path)] = summarize(header, rows)
    report = render_markdown(summaries)
    write_report(report, args.report)
    print(report)
    print(f"Wrote report to {args.report}")


if __name__ == "__main__":
    main()
