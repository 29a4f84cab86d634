"""Human factuality annotation schema and its aggregation into percentage tables.

A generated summary is *factual* when its PICO elements are aligned with the
target's and its direction of effect is correct. PICO alignment is
precision-based: the generated summary may omit target elements but must not
add any that appear neither in the target nor in the review's Objectives.
"""

from __future__ import annotations

import csv
import enum
import io
import re
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Iterable, Mapping, Sequence

from picosum.corpus import DataError, read_jsonl


class DirectionValue(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NO_EFFECT = "no_effect"
    NO_EVIDENCE = "no_evidence"
    NO_CLAIM = "no_claim"


EVAL_COLUMNS = ("pico", "direction", "factual", "contradictory", "malformed", "no_evidence")
EVAL_LABELS = {
    "pico": "PICO",
    "direction": "Direction",
    "factual": "Factual",
    "contradictory": "Contradict.",
    "malformed": "Malformed",
    "no_evidence": "No evid.",
}


@dataclass(frozen=True)
class AnnotationRecord:
    review_id: str
    model_id: str
    pico_aligned: bool
    direction_correct: bool
    contradictory: bool
    malformed: bool
    no_evidence: bool
    target_direction: DirectionValue
    generated_direction: DirectionValue

    def __post_init__(self):
        object.__setattr__(self, "target_direction", DirectionValue(self.target_direction))
        object.__setattr__(self, "generated_direction", DirectionValue(self.generated_direction))
        if self.no_evidence != (self.generated_direction is DirectionValue.NO_EVIDENCE):
            raise DataError(
                f"{self.review_id}/{self.model_id}: no_evidence must be true exactly when "
                f"generated_direction is no_evidence"
            )

    @classmethod
    def from_record(cls, obj: Mapping) -> "AnnotationRecord":
        if "factual" in obj:
            raise DataError("'factual' is derived from pico_aligned and direction_correct; do not store it")
        flags = ("pico_aligned", "direction_correct", "contradictory", "malformed", "no_evidence")
        for name in flags:
            if not isinstance(obj.get(name), bool):
                raise DataError(f"field {name!r} must be a boolean")
        return cls(
            review_id=str(obj["review_id"]),
            model_id=str(obj["model_id"]),
            target_direction=obj["target_direction"],
            generated_direction=obj["generated_direction"],
            **{name: obj[name] for name in flags},
        )


def normalize_element(element: str) -> str:
    return re.sub(r"\s+", " ", element.casefold()).strip()


def pico_alignment(target_set: Iterable[str], generated_set: Iterable[str], objectives_set: Iterable[str] = ()) -> bool:
    generated = {normalize_element(e) for e in generated_set}
    allowed = {normalize_element(e) for e in target_set} | {normalize_element(e) for e in objectives_set}
    return bool(generated) and generated <= allowed


def factual(record: AnnotationRecord) -> bool:
    return record.pico_aligned and record.direction_correct


def _percent(count: int, total: int) -> int:
    # half-up on the exact ratio, not on a float
    return floor(Fraction(100 * count, total) + Fraction(1, 2))


@dataclass
class EvalTable:
    rows: dict[str, dict[str, int]]
    counts: dict[str, int]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model_id"] + [EVAL_LABELS[c] for c in EVAL_COLUMNS] + ["records"])
        for model_id, row in self.rows.items():
            writer.writerow([model_id] + [row[c] for c in EVAL_COLUMNS] + [self.counts[model_id]])
        return buf.getvalue()

    def to_text(self) -> str:
        header = ["Model"] + [EVAL_LABELS[c] for c in EVAL_COLUMNS] + ["N"]
        body = [[m] + [str(r[c]) for c in EVAL_COLUMNS] + [str(self.counts[m])] for m, r in self.rows.items()]
        widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]
        lines = []
        for line in [header] + body:
            cells = [line[0].ljust(widths[0])] + [cell.rjust(w) for cell, w in zip(line[1:], widths[1:])]
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {m: {**r, "records": self.counts[m]} for m, r in self.rows.items()}


def aggregate_annotations(records: Sequence[AnnotationRecord]) -> EvalTable:
    """Per-model percentages of each judgment, rounded half-up; rows sorted by model_id."""
    if not records:
        raise DataError("no annotation records to aggregate")
    groups: dict[str, list[AnnotationRecord]] = defaultdict(list)
    for rec in records:
        groups[rec.model_id].append(rec)
    rows = {}
    counts = {}
    for model_id in sorted(groups):
        recs = groups[model_id]
        tallies = {
            "pico": sum(r.pico_aligned for r in recs),
            "direction": sum(r.direction_correct for r in recs),
            "factual": sum(factual(r) for r in recs),
            "contradictory": sum(r.contradictory for r in recs),
            "malformed": sum(r.malformed for r in recs),
            "no_evidence": sum(r.no_evidence for r in recs),
        }
        rows[model_id] = {c: _percent(tallies[c], len(recs)) for c in EVAL_COLUMNS}
        counts[model_id] = len(recs)
    return EvalTable(rows, counts)


def load_annotations(path) -> list[AnnotationRecord]:
    records = []
    for lineno, obj in read_jsonl(path):
        try:
            records.append(AnnotationRecord.from_record(obj))
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return records
