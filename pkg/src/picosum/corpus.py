"""Review ingestion, metadata cleaning and dataset statistics.

Trial abstracts pulled from the Cochrane library carry hyperlinks, registry
identifiers, funding notes, copyright lines and publication records. These are
removed with an ordered, data-driven list of regular expressions (the default
list ships as ``data/cleaning_rules.json``).
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from picosum.tokenizer import DOC_SEP

RULE_CATEGORIES = ("hyperlink", "trial_identifier", "funding", "copyright", "publication_record")

_WHITESPACE_RE = re.compile(r"\s+")
_MAX_CLEAN_PASSES = 8


class DataError(ValueError):
    """Malformed input record or file."""


@dataclass(frozen=True)
class Review:
    review_id: str
    abstracts: tuple[str, ...]
    target_summary: str | None = None
    objectives: str | None = None

    def __post_init__(self):
        if not self.review_id:
            raise DataError("review_id must be nonempty")
        object.__setattr__(self, "abstracts", tuple(self.abstracts))

    def to_record(self) -> dict:
        record: dict = {"review_id": self.review_id}
        if self.target_summary is not None:
            record["target"] = self.target_summary
        record["abstracts"] = list(self.abstracts)
        if self.objectives is not None:
            record["objectives"] = self.objectives
        return record


@dataclass(frozen=True)
class CleaningRule:
    name: str
    pattern: re.Pattern
    replacement: str = ""


@dataclass(frozen=True)
class CleaningRules:
    """Ordered metadata-removal rules; applied in declaration order."""

    rules: tuple[CleaningRule, ...]
    version: str = "unversioned"

    def __post_init__(self):
        names = [r.name for r in self.rules]
        unknown = sorted(set(names) - set(RULE_CATEGORIES))
        if unknown:
            raise DataError(f"unknown cleaning rule categories: {unknown}")
        missing = [c for c in RULE_CATEGORIES if c not in names]
        if missing:
            raise DataError(f"cleaning rules missing categories: {missing}")

    @classmethod
    def from_dict(cls, data: Mapping) -> "CleaningRules":
        rules = []
        for entry in sorted(data["rules"], key=lambda r: r.get("order", 0)):
            flags = 0
            for flag in entry.get("flags", []):
                flags |= getattr(re, flag)
            rules.append(CleaningRule(entry["name"], re.compile(entry["pattern"], flags), entry.get("replacement", "")))
        return cls(tuple(rules), str(data.get("version", "unversioned")))

    @classmethod
    def load(cls, path: str | Path) -> "CleaningRules":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def default(cls) -> "CleaningRules":
        text = resources.files("picosum").joinpath("data/cleaning_rules.json").read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))


@dataclass
class StatsReport:
    sample_count: int
    avg_input_length: float
    avg_pico_spans_input: float
    avg_summary_length: float | None = None
    avg_pico_spans_summary: float | None = None
    # weights needed to merge reports; not part of the rendered table
    summary_count: int = field(default=0, repr=False)

    def rounded(self) -> dict:
        """Values as reported: token and span averages rounded to integers."""

        def r(x):
            return None if x is None else math.floor(x + 0.5)

        return {
            "sample_count": self.sample_count,
            "avg_input_length": r(self.avg_input_length),
            "avg_summary_length": r(self.avg_summary_length),
            "avg_pico_spans_input": r(self.avg_pico_spans_input),
            "avg_pico_spans_summary": r(self.avg_pico_spans_summary),
        }

    def to_json(self) -> str:
        return json.dumps(self.rounded(), sort_keys=False)

    def to_table(self) -> str:
        labels = [
            ("# samples", "sample_count"),
            ("Avg. input length", "avg_input_length"),
            ("Avg. summary length", "avg_summary_length"),
            ("Avg. # PICO spans in input", "avg_pico_spans_input"),
            ("Avg. # PICO spans in summary", "avg_pico_spans_summary"),
        ]
        values = self.rounded()
        width = max(len(label) for label, _ in labels)
        lines = []
        for label, key in labels:
            v = values[key]
            lines.append(f"{label:<{width}}  {'n/a' if v is None else v:>6}")
        return "\n".join(lines) + "\n"


def clean_document(raw: str, rules: CleaningRules) -> str:
    """Remove every substring matched by ``rules``.

    Rules run in order and the whole pass is repeated until nothing matches,
    which makes the result idempotent even when a removal joins two fragments
    into a new match. Whitespace around removed spans is left untouched; see
    :func:`normalize_whitespace`.
    """
    text = raw
    for _ in range(_MAX_CLEAN_PASSES):
        before = text
        for rule in rules.rules:
            text = rule.pattern.sub(rule.replacement, text)
        if text == before:
            return text
    return text


def normalize_whitespace(text: str) -> str:
    return _WHITESPACE_RE.sub(" ", text).strip()


def clean_abstract(raw: str, rules: CleaningRules) -> str:
    """Cleaning as applied to model inputs: rule removal, then whitespace collapse.

    Span annotation offsets refer to the text returned here.
    """
    return normalize_whitespace(clean_document(raw, rules))


def concat_with_separators(docs: Sequence[str], separator: str = DOC_SEP) -> str:
    if not docs:
        raise DataError("review has no abstracts to concatenate")
    return "".join(f"{doc} {separator}" if i == 0 else f" {doc} {separator}" for i, doc in enumerate(docs))


def parse_review(record: Mapping, where: str = "") -> Review:
    try:
        review_id = record["review_id"]
        abstracts = record["abstracts"]
    except (KeyError, TypeError) as exc:
        raise DataError(f"{where}missing field {exc}") from None
    if not isinstance(review_id, str) or not isinstance(abstracts, list):
        raise DataError(f"{where}review_id must be a string and abstracts a list")
    if not all(isinstance(a, str) for a in abstracts):
        raise DataError(f"{where}abstracts must be strings")
    target = record.get("target")
    objectives = record.get("objectives")
    return Review(review_id, tuple(abstracts), target, objectives)


def read_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    """Yield (line number, object) pairs, skipping blank lines."""
    path = Path(path)
    try:
        handle = path.open(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def load_reviews(path: str | Path) -> list[Review]:
    return [parse_review(obj, f"{path}:{lineno}: ") for lineno, obj in read_jsonl(path)]


def write_reviews(reviews: Iterable[Review], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for review in reviews:
            fh.write(json.dumps(review.to_record(), ensure_ascii=False) + "\n")


def dataset_stats(reviews: Sequence[Review], spans_per_doc: Mapping, tokenizer, rules: CleaningRules | None = None) -> StatsReport:
    """Sample count, average input/summary lengths and average PICO span counts.

    ``spans_per_doc`` maps review_id to a mapping of doc_index to span lists
    (doc_index -1 is the target summary). Input length counts tokens of the
    cleaned abstracts; separator tokens are not counted. Summary fields stay
    None when no review has a target summary.
    """
    if not reviews:
        raise DataError("dataset_stats needs at least one review")
    rules = rules or CleaningRules.default()
    input_lengths = []
    input_spans = []
    summary_lengths = []
    summary_spans = []
    for review in reviews:
        doc_spans = spans_per_doc.get(review.review_id, {})
        input_lengths.append(sum(len(tokenizer.split(clean_abstract(a, rules))) for a in review.abstracts))
        input_spans.append(sum(len(s) for idx, s in doc_spans.items() if idx >= 0))
        if review.target_summary is not None:
            summary_lengths.append(len(tokenizer.split(review.target_summary)))
            summary_spans.append(len(doc_spans.get(-1, ())))

    n = len(reviews)
    report = StatsReport(
        sample_count=n,
        avg_input_length=sum(input_lengths) / n,
        avg_pico_spans_input=sum(input_spans) / n,
    )
    if summary_lengths:
        report.avg_summary_length = sum(summary_lengths) / len(summary_lengths)
        report.avg_pico_spans_summary = sum(summary_spans) / len(summary_spans)
        report.summary_count = len(summary_lengths)
    return report


def merge_stats(a: StatsReport, b: StatsReport) -> StatsReport:
    """Combine reports of two disjoint review lists, weighting by counts."""
    n = a.sample_count + b.sample_count
    merged = StatsReport(
        sample_count=n,
        avg_input_length=(a.avg_input_length * a.sample_count + b.avg_input_length * b.sample_count) / n,
        avg_pico_spans_input=(a.avg_pico_spans_input * a.sample_count + b.avg_pico_spans_input * b.sample_count) / n,
    )
    m = a.summary_count + b.summary_count
    if m:
        merged.avg_summary_length = sum(
            r.avg_summary_length * r.summary_count for r in (a, b) if r.summary_count
        ) / m
        merged.avg_pico_spans_summary = sum(
            r.avg_pico_spans_summary * r.summary_count for r in (a, b) if r.summary_count
        ) / m
        merged.summary_count = m
    return merged
