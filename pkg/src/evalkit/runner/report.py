"""Report emission: raw JSON, summary CSV and a markdown results table.

Everything here is a pure function of its inputs (no timestamps, no absolute
paths, sorted keys), so identical runs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from .aggregate import DIRECTIONS, GROUP_FIELDS, TABLE_METRICS, AggregateRow, aggregate, radar_normalize
from .evaluate import METRICS, MetricReport

FORMATS = ("json", "csv", "markdown")
RAW_FILE = "raw.json"
CLIPS_FILE = "clips.csv"
SUMMARY_FILES = {"csv": "summary.csv", "markdown": "summary.md"}
SHORT_NAMES = {
    "timbre_consistency": "Timbre",
    "reverb_consistency": "Reverb",
    "sound_fidelity": "Fidelity",
    "content_error_rate": "WER/CER",
    "prosody": "Prosody",
    "richness": "Richness",
    "hierarchy": "Hierarchy",
    "rtf": "RTF",
}


def _clean(obj):
    """NaN/inf -> None, tuples -> lists, recursively."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def build_raw(reports: Sequence[MetricReport], config: dict | None = None, provenance: dict | None = None,
              group_by: Sequence[str] = ("model",)) -> dict:
    reports = sorted(reports, key=lambda r: r.case_id)
    raw = {"clips": [r.to_dict() for r in reports], "config": config or {}, "provenance": provenance or {},
           "aggregates": {}, "radar": []}
    if reports:
        rows = aggregate(reports, group_by)
        raw["aggregates"]["overall"] = [row.to_dict() for row in rows]
        raw["aggregates"]["by_scenario"] = [row.to_dict() for row in aggregate(reports, ("model", "scenario"))]
        raw["aggregates"]["by_challenge"] = [row.to_dict() for row in aggregate(reports, ("model", "challenge"))]
        raw["radar"] = radar_normalize(rows)
    return raw


def reports_from_raw(raw: dict) -> list[MetricReport]:
    return [MetricReport.from_dict(d) for d in raw.get("clips", [])]


# ---------------------------------------------------------------------------
# renderers


def render_csv(rows: Sequence[AggregateRow], group_by: Sequence[str] = ("model",),
               metrics: Sequence[str] = TABLE_METRICS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*group_by, "count", *(f"{m}_{s}" for m in metrics for s in ("mean", "std", "n"))])
    for row in rows:
        cells = [row.key.get(g, "") for g in group_by] + [row.count]
        for m in metrics:
            mean, std = row.mean.get(m), row.std.get(m)
            cells += ["" if mean is None else repr(mean), "" if std is None else repr(std), row.n.get(m, 0)]
        w.writerow(cells)
    return buf.getvalue()


def render_clips_csv(reports: Iterable[MetricReport], metrics: Sequence[str] = TABLE_METRICS) -> str:
    """One row per clip; a failed metric leaves its value empty and its status set."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["case_id", *GROUP_FIELDS, *metrics, *(f"{m}_status" for m in metrics)])
    for r in sorted(reports, key=lambda r: r.case_id):
        vals = [r.values.get(m) for m in metrics]
        w.writerow([r.case_id, *(getattr(r, g) for g in GROUP_FIELDS),
                     *("" if v is None else repr(v) for v in vals),
                     *(r.status.get(m, "") for m in metrics)])
    return buf.getvalue()


def _cell(row: AggregateRow, m: str) -> str:
    mean, std = row.mean.get(m), row.std.get(m)
    if mean is None:
        return f"n/a (0/{row.count})"
    text = f"{mean:.3f}±{std:.3f}"
    if row.n.get(m, 0) < row.count:
        text += f" ({row.n[m]}/{row.count})"
    rank = row.rank.get(m)
    if rank == 1:
        return f"**{text}**"
    if rank == 2:
        return f"<u>{text}</u>"
    return text


def render_markdown(rows: Sequence[AggregateRow], group_by: Sequence[str] = ("model",),
                    metrics: Sequence[str] = TABLE_METRICS) -> str:
    """Results table: mean±std cells, best in bold, second best underlined."""
    head = [g.capitalize() for g in group_by] + ["N"]
    head += [f"{SHORT_NAMES.get(m, m)} {'↑' if DIRECTIONS[m][0] else '↓'}" for m in metrics]
    lines = ["| " + " | ".join(head) + " |", "|" + "|".join(["---"] * len(head)) + "|"]
    for row in rows:
        cells = [row.key.get(g, "") or "-" for g in group_by] + [str(row.count)]
        cells += [_cell(row, m) for m in metrics]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render(reports: Sequence[MetricReport], fmt: str, group_by: Sequence[str] = ("model",),
           config: dict | None = None, provenance: dict | None = None) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    if fmt == "json":
        return dumps(build_raw(reports, config, provenance, group_by))
    rows = aggregate(reports, group_by) if reports else []
    return render_csv(rows, group_by) if fmt == "csv" else render_markdown(rows, group_by)


def emit_report(reports: Sequence[MetricReport], report_dir: str | Path, config: dict | None = None,
                provenance: dict | None = None, group_by: Sequence[str] = ("model",),
                formats: Sequence[str] = FORMATS) -> dict[str, Path]:
    """Write raw.json, clips.csv and the summary files; returns the written paths."""
    out = Path(report_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    raw_path = out / RAW_FILE
    raw_path.write_text(dumps(build_raw(reports, config, provenance, group_by)), encoding="utf-8")
    written["json"] = raw_path
    clips_path = out / CLIPS_FILE
    clips_path.write_text(render_clips_csv(reports), encoding="utf-8")
    written["clips"] = clips_path
    for fmt in formats:
        if fmt in SUMMARY_FILES:
            path = out / SUMMARY_FILES[fmt]
            path.write_text(render(reports, fmt, group_by), encoding="utf-8")
            written[fmt] = path
    return written


__all__ = ["FORMATS", "METRICS", "build_raw", "dumps", "emit_report", "render", "render_clips_csv",
           "render_csv", "render_markdown", "reports_from_raw"]
