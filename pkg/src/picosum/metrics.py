"""Automatic evaluation: ROUGE, extractiveness, ΔEI and ΔEI-F1.

Scoring text is lowercased and reduced to alphanumeric tokens; stemming is
off unless requested (it needs the optional ``nltk`` dependency). Direction
distributions for ΔEI come from an external classifier; a cue-phrase stub is
included only for end-to-end demos.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

from picosum.corpus import CleaningRules, DataError, clean_abstract
from picosum.tokenizer import split_words

DIRECTIONS = ("increases", "decreases", "no_change")
DISTRIBUTION_TOL = 1e-9

_ALNUM_RE = re.compile(r"\w")


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, overlap: int, cand_total: int, ref_total: int) -> "RougeScore":
        p = overlap / cand_total if cand_total else 0.0
        r = overlap / ref_total if ref_total else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return cls(p, r, f)


@lru_cache(maxsize=1)
def _porter():
    try:
        from nltk.stem.porter import PorterStemmer
    except ImportError as exc:  # pragma: no cover - depends on optional extra
        raise RuntimeError("stemming requires nltk (pip install 'artifact[stem]')") from exc
    return PorterStemmer()


def score_tokens(text: str, tokenizer=None, stem: bool = False) -> list[str]:
    if tokenizer is None:
        tokens = split_words(text)
    else:
        tokens = [t for t in tokenizer.split(text.lower()) if _ALNUM_RE.search(t)]
    if stem:
        stemmer = _porter()
        tokens = [stemmer.stem(t) for t in tokens]
    return tokens


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: str, reference: str, n: int = 1, tokenizer=None, stem: bool = False) -> RougeScore:
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = ngrams(score_tokens(candidate, tokenizer, stem), n)
    ref = ngrams(score_tokens(reference, tokenizer, stem), n)
    overlap = sum((cand & ref).values())
    return RougeScore.from_counts(overlap, sum(cand.values()), sum(ref.values()))


def lcs_length(a: Sequence, b: Sequence) -> int:
    """Longest-common-subsequence length.

    Bit-vector form of the standard LCS dynamic programme (Hyyrö's
    formulation): one machine-word operation per row and block of columns,
    so long source documents stay cheap. Zero bits of ``v`` count the LCS.
    """
    if not a or not b:
        return 0
    positions: dict = {}
    for j, y in enumerate(b):
        positions[y] = positions.get(y, 0) | (1 << j)
    full = (1 << len(b)) - 1
    v = full
    for x in a:
        match = positions.get(x)
        if match is None:
            continue
        u = v & match
        v = ((v + u) | (v - u)) & full
    return len(b) - v.bit_count()


def lcs_length_table(a: Sequence, b: Sequence) -> int:
    """Plain O(len(a) * len(b)) table version of :func:`lcs_length`."""
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str, tokenizer=None, stem: bool = False) -> RougeScore:
    cand = score_tokens(candidate, tokenizer, stem)
    ref = score_tokens(reference, tokenizer, stem)
    return RougeScore.from_counts(lcs_length(cand, ref), len(cand), len(ref))


def extractiveness(
    summary: str,
    sources: Sequence[str],
    tokenizer=None,
    rules: CleaningRules | None = None,
    stem: bool = False,
) -> dict[str, RougeScore]:
    """ROUGE-1/2/L of ``summary`` against its cleaned, concatenated sources."""
    if not sources:
        raise DataError("extractiveness needs at least one source document")
    rules = rules or CleaningRules.default()
    reference = " ".join(clean_abstract(s, rules) for s in sources)
    return {
        "rouge1": rouge_n(summary, reference, 1, tokenizer, stem),
        "rouge2": rouge_n(summary, reference, 2, tokenizer, stem),
        "rougeL": rouge_l(summary, reference, tokenizer, stem),
    }


def check_distribution(p: Sequence[float], tol: float = DISTRIBUTION_TOL) -> tuple[float, float, float]:
    if len(p) != len(DIRECTIONS):
        raise ValueError(f"direction distribution needs {len(DIRECTIONS)} entries, got {len(p)}")
    p = tuple(float(x) for x in p)
    if any(not math.isfinite(x) or x < 0 for x in p):
        raise ValueError(f"direction probabilities must be finite and nonnegative: {p}")
    if abs(sum(p) - 1.0) > tol:
        raise ValueError(f"direction probabilities sum to {sum(p)!r}, not 1")
    return p


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    return 0.5 * sum(abs(a - b) for a, b in zip(p, q))


def hellinger(p: Sequence[float], q: Sequence[float]) -> float:
    return math.sqrt(max(0.0, 1.0 - sum(math.sqrt(a * b) for a, b in zip(p, q))))


DISTANCES: dict[str, Callable[[Sequence[float], Sequence[float]], float]] = {
    "total_variation": total_variation,
    "hellinger": hellinger,
}


def delta_ei(target: Sequence[float], generated: Sequence[float], distance: str = "total_variation", tol: float = DISTRIBUTION_TOL) -> float:
    """Distance between target and generated direction distributions.

    Order of entries is (increases, decreases, no_change).
    """
    return DISTANCES[distance](check_distribution(target, tol), check_distribution(generated, tol))


def direction_label(p: Sequence[float]) -> str:
    """Argmax direction; any tie for the maximum resolves to no_change."""
    top = max(p)
    winners = [d for d, x in zip(DIRECTIONS, p) if x == top]
    return winners[0] if len(winners) == 1 else "no_change"


def delta_ei_f1(target_labels: Sequence[str], generated_labels: Sequence[str]) -> float:
    """Macro-F1 of generated directions, treating the target's as gold.

    Classes absent from both gold and predictions are left out of the average.
    """
    if len(target_labels) != len(generated_labels):
        raise ValueError(f"label lists differ in length: {len(target_labels)} vs {len(generated_labels)}")
    if not target_labels:
        raise ValueError("need at least one label pair")
    classes = sorted(set(target_labels) | set(generated_labels))
    unknown = set(classes) - set(DIRECTIONS)
    if unknown:
        raise ValueError(f"unknown direction labels: {sorted(unknown)}")
    f1s = []
    for c in classes:
        tp = sum(g == c and p == c for g, p in zip(target_labels, generated_labels))
        fp = sum(g != c and p == c for g, p in zip(target_labels, generated_labels))
        fn = sum(g == c and p != c for g, p in zip(target_labels, generated_labels))
        f1s.append(2 * tp / (2 * tp + fp + fn) if tp else 0.0)
    return sum(f1s) / len(f1s)


_CUES = {
    "increases": ("increase", "increased", "increases", "improve", "improved", "improves", "higher", "greater", "more effective", "beneficial", "benefit"),
    "decreases": ("decrease", "decreased", "decreases", "reduce", "reduced", "reduces", "reduction", "lower", "fewer", "less"),
    "no_change": ("no difference", "no significant", "no effect", "not have", "did not", "does not", "insufficient evidence", "not enough evidence", "no evidence", "unclear"),
}


def cue_direction(text: str) -> tuple[float, float, float]:
    """Crude cue-phrase direction distribution (demo stand-in for a classifier)."""
    low = " " + re.sub(r"\s+", " ", text.lower()) + " "
    counts = [sum(low.count(f" {cue} ") + low.count(f" {cue}.") + low.count(f" {cue},") for cue in _CUES[d]) for d in DIRECTIONS]
    total = sum(counts)
    if total == 0:
        return (0.0, 0.0, 1.0)
    return tuple(c / total for c in counts)


METRIC_COLUMNS = ("rouge1", "rouge2", "rougeL", "bertscore", "delta_ei", "ext_rouge1", "ext_rouge2", "ext_rougeL")
COLUMN_LABELS = {
    "rouge1": "R-1",
    "rouge2": "R-2",
    "rougeL": "R-L",
    "bertscore": "BERTScore",
    "delta_ei": "ΔEI",
    "delta_ei_f1": "ΔEI-F1",
    "ext_rouge1": "Ext R-1",
    "ext_rouge2": "Ext R-2",
    "ext_rougeL": "Ext R-L",
}


@dataclass
class MetricsReport:
    """Per-review metric rows plus corpus means.

    Optional columns (BERTScore, ΔEI) are present only when every row has them.
    """

    model_id: str
    rows: list[dict] = field(default_factory=list)
    delta_ei_f1: float | None = None

    @property
    def columns(self) -> list[str]:
        return [c for c in METRIC_COLUMNS if self.rows and all(r.get(c) is not None for r in self.rows)]

    def means(self) -> dict[str, float]:
        out = {c: sum(r[c] for r in self.rows) / len(self.rows) for c in self.columns}
        if self.delta_ei_f1 is not None:
            out["delta_ei_f1"] = self.delta_ei_f1
        return out

    def to_dict(self) -> dict:
        cols = self.columns
        return {
            "model_id": self.model_id,
            "columns": cols + (["delta_ei_f1"] if self.delta_ei_f1 is not None else []),
            "corpus": self.means(),
            "per_review": [{"review_id": r["review_id"], **{c: r[c] for c in cols}} for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_csv(self) -> str:
        cols = self.columns
        header = ["review_id"] + [COLUMN_LABELS[c] for c in cols]
        if self.delta_ei_f1 is not None:
            header.append(COLUMN_LABELS["delta_ei_f1"])
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for r in self.rows:
            row = [r["review_id"]] + [f"{r[c]:.4f}" for c in cols]
            if self.delta_ei_f1 is not None:
                row.append("")
            writer.writerow(row)
        means = self.means()
        row = ["mean"] + [f"{means[c]:.4f}" for c in cols]
        if self.delta_ei_f1 is not None:
            row.append(f"{self.delta_ei_f1:.4f}")
        writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetricsReport":
        report = cls(data["model_id"], [dict(r) for r in data["per_review"]])
        report.delta_ei_f1 = data.get("corpus", {}).get("delta_ei_f1")
        return report


def score_review(
    review_id: str,
    generated: str,
    target: str,
    sources: Sequence[str],
    direction: Mapping | None = None,
    tokenizer=None,
    rules: CleaningRules | None = None,
    stem: bool = False,
    distance: str = "total_variation",
) -> dict:
    """One report row for a generated summary."""
    ext = extractiveness(generated, sources, tokenizer, rules, stem)
    row = {
        "review_id": review_id,
        "rouge1": rouge_n(generated, target, 1, tokenizer, stem).f1,
        "rouge2": rouge_n(generated, target, 2, tokenizer, stem).f1,
        "rougeL": rouge_l(generated, target, tokenizer, stem).f1,
        "ext_rouge1": ext["rouge1"].f1,
        "ext_rouge2": ext["rouge2"].f1,
        "ext_rougeL": ext["rougeL"].f1,
        "bertscore": None,
        "delta_ei": None,
    }
    if direction is not None:
        if direction.get("target_direction") is not None and direction.get("generated_direction") is not None:
            row["delta_ei"] = delta_ei(direction["target_direction"], direction["generated_direction"], distance)
        if direction.get("bertscore") is not None:
            row["bertscore"] = float(direction["bertscore"])
    return row
