"""Report writers: one row per (mode, seed), stable field order.

CSV rounds floats to 4 decimals (table precision); JSON is lossless.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .mission import MetricsReport


def report_rows(reports: list[MetricsReport]) -> tuple[list[str], list[dict]]:
    if not reports:
        raise ValueError("need at least one report")
    rows = [r.to_dict() for r in reports]
    header = list(rows[0].keys())
    return header, rows


def emit_report(reports: list[MetricsReport], out_path: str | Path,
                format: str = "csv") -> Path:
    out_path = Path(out_path)
    header, rows = report_rows(reports)
    if format == "json":
        out_path.write_text(json.dumps(rows, indent=2, sort_keys=False) + "\n")
    elif format == "csv":
        with open(out_path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            for row in rows:
                w.writerow([_csv_cell(row[k]) for k in header])
    else:
        raise ValueError(f"unknown report format {format!r}")
    return out_path


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def emit_batch_summary(batch: dict, out_path: str | Path) -> Path:
    """Per-mode means and pairwise win counts as JSON."""
    out_path = Path(out_path)
    payload = {
        "means": batch["means"],
        "wins": batch["wins"],
    }
    out_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return out_path
