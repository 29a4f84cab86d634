"""Cross-model comparison tables and figures from per-model metric reports."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

from picosum.humaneval import EVAL_COLUMNS, EVAL_LABELS, EvalTable
from picosum.metrics import COLUMN_LABELS, MetricsReport
from picosum import plotting

SUMMARY_COLUMNS = ("rouge1", "rouge2", "rougeL", "bertscore", "delta_ei", "delta_ei_f1")
EXTRACTIVE_COLUMNS = ("ext_rouge1", "ext_rouge2", "ext_rougeL")


def load_metrics(paths: Sequence[str | Path]) -> list[MetricsReport]:
    return [MetricsReport.from_dict(json.loads(Path(p).read_text(encoding="utf-8"))) for p in paths]


def comparison_rows(reports: Sequence[MetricsReport], columns: Sequence[str]) -> tuple[list[str], list[list[str]]]:
    means = [r.means() for r in reports]
    present = [c for c in columns if any(c in m for m in means)]
    rows = []
    for report, m in zip(reports, means):
        rows.append([report.model_id] + [f"{m[c]:.3f}" if c in m else "" for c in present])
    return ["model_id"] + [COLUMN_LABELS[c] for c in present], rows


def write_report(
    reports: Sequence[MetricsReport],
    out_dir: str | Path,
    human: EvalTable | None = None,
    figures: bool = True,
) -> list[Path]:
    """Write ``summary.csv``/``summary.txt``, ``extractiveness.csv`` and PNG figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit_csv(name, header, rows):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        path = out / name
        path.write_text(buf.getvalue(), encoding="utf-8")
        written.append(path)

    header, rows = comparison_rows(reports, SUMMARY_COLUMNS)
    emit_csv("summary.csv", header, rows)
    widths = [max(len(x) for x in col) for col in zip(header, *rows)]
    text = "\n".join(
        "  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(line, widths))).rstrip()
        for line in [header] + rows
    )
    (out / "summary.txt").write_text(text + "\n", encoding="utf-8")
    written.append(out / "summary.txt")

    ext_header, ext_rows = comparison_rows(reports, EXTRACTIVE_COLUMNS)
    emit_csv("extractiveness.csv", ext_header, ext_rows)

    if human is not None:
        path = out / "humaneval.csv"
        path.write_text(human.to_csv(), encoding="utf-8")
        written.append(path)

    if not figures:
        return written

    means = {r.model_id: r.means() for r in reports}
    rouge_cols = [c for c in ("rouge1", "rouge2", "rougeL") if all(c in m for m in means.values())]
    if rouge_cols:
        written.append(
            plotting.grouped_bars(
                [COLUMN_LABELS[c] for c in rouge_cols],
                {mid: [m[c] for c in rouge_cols] for mid, m in means.items()},
                out / "rouge.png",
                title="ROUGE F1 against target summaries",
                ylabel="F1",
            )
        )
    if all(c in m for m in means.values() for c in EXTRACTIVE_COLUMNS):
        written.append(
            plotting.grouped_bars(
                [COLUMN_LABELS[c] for c in EXTRACTIVE_COLUMNS],
                {mid: [m[c] for c in EXTRACTIVE_COLUMNS] for mid, m in means.items()},
                out / "extractiveness.png",
                title="Overlap with source documents (lower = more abstractive)",
                ylabel="F1",
            )
        )
    ei_cols = [c for c in ("delta_ei", "delta_ei_f1") if all(c in m for m in means.values())]
    if ei_cols:
        written.append(
            plotting.grouped_bars(
                [COLUMN_LABELS[c] for c in ei_cols],
                {mid: [m[c] for c in ei_cols] for mid, m in means.items()},
                out / "delta_ei.png",
                title="Direction-of-effect agreement",
                ylim=(0.0, 1.0),
            )
        )
    if human is not None:
        written.append(
            plotting.grouped_bars(
                [EVAL_LABELS[c] for c in EVAL_COLUMNS],
                {mid: [row[c] for c in EVAL_COLUMNS] for mid, row in human.rows.items()},
                out / "humaneval.png",
                title="Human evaluation",
                ylabel="% of summaries",
                ylim=(0, 100),
            )
        )
    return written
