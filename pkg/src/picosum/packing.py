"""Token-budgeted packing of a review's abstracts into one model input.

Two input modes:

* ``default``: the whole budget is split evenly across documents and every
  document is truncated to its share.
* ``last3``: each document is first reduced to its final ``k`` sentences.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from picosum.corpus import CleaningRules, DataError, Review, clean_abstract, read_jsonl
from picosum.spans import PicoSpan, insert_entity_markers, normalize_spans

# sentence-final punctuation followed by whitespace + uppercase, or end of text
_BOUNDARY_RE = re.compile(r"[.!?]+[\"')\]]*(?=\s+[A-Z]|\s*$)")
_LAST_WORD_RE = re.compile(r"(\S+)$")

ABBREVIATIONS = frozenset(
    {
        "al.", "approx.", "ca.", "cf.", "dr.", "e.g.", "eg.", "etc.", "fig.", "figs.", "i.e.", "ie.",
        "inc.", "jr.", "min.", "mr.", "mrs.", "ms.", "no.", "nos.", "prof.", "resp.", "sr.", "st.",
        "vol.", "vs.", "wk.", "yr.", "yrs.",
    }
)


class InputMode(str, enum.Enum):
    DEFAULT = "default"
    LAST3 = "last3"


@dataclass(frozen=True)
class PackConfig:
    budget: int = 4096
    input_mode: InputMode = InputMode.DEFAULT
    k: int = 3
    marking: bool = True

    def __post_init__(self):
        object.__setattr__(self, "input_mode", InputMode(self.input_mode))
        if self.budget <= 0:
            raise ValueError(f"budget must be positive, got {self.budget}")
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")


@dataclass
class PackedInput:
    review_id: str
    token_ids: list[int]
    doc_boundaries: list[int]
    entity_token_positions: list[int]
    marking: bool
    special_ids: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.token_ids)

    def to_record(self) -> dict:
        return {
            "review_id": self.review_id,
            "token_ids": self.token_ids,
            "doc_boundaries": self.doc_boundaries,
            "entity_token_positions": self.entity_token_positions,
            "marking": self.marking,
            "special_ids": self.special_ids,
        }

    @classmethod
    def from_record(cls, record: Mapping) -> "PackedInput":
        return cls(
            review_id=record["review_id"],
            token_ids=list(record["token_ids"]),
            doc_boundaries=list(record["doc_boundaries"]),
            entity_token_positions=list(record["entity_token_positions"]),
            marking=bool(record.get("marking", True)),
            special_ids=dict(record.get("special_ids", {})),
        )


def write_packed(items: Iterable[PackedInput], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item.to_record(), separators=(",", ":")) + "\n")


def read_packed(path: str | Path) -> list[PackedInput]:
    return [PackedInput.from_record(obj) for _, obj in read_jsonl(path)]


def distribute_budget(doc_token_counts: Sequence[int], budget: int, overhead: int = 1, global_overhead: int = 0) -> list[int]:
    """Even per-document token allowance; the division remainder is dropped.

    ``overhead`` is reserved per document (its separator) and
    ``global_overhead`` once per sequence (the start token). Document lengths
    only determine the count: short documents do not donate unused budget.
    """
    n = len(doc_token_counts)
    if n == 0:
        raise DataError("cannot distribute a budget over zero documents")
    if overhead < 1:
        raise ValueError("overhead must reserve at least the separator token")
    share = (budget - global_overhead) // n
    if share < overhead:
        raise ValueError(f"budget {budget} cannot grant {n} documents {overhead} overhead token(s) each")
    return [max(share - overhead, 0)] * n


def sentence_starts(text: str) -> list[int]:
    """Character offsets where sentences begin."""
    starts = []
    pos = 0
    n = len(text)
    while pos < n and text[pos].isspace():
        pos += 1
    if pos < n:
        starts.append(pos)
    for m in _BOUNDARY_RE.finditer(text):
        word = _LAST_WORD_RE.search(text[: m.start() + 1])
        if word and m.group().startswith(".") and word.group(1).lower() in ABBREVIATIONS:
            continue
        nxt = m.end()
        while nxt < n and text[nxt].isspace():
            nxt += 1
        if nxt < n:
            starts.append(nxt)
    return starts


def last_k_offset(text: str, k: int) -> int:
    """Offset where the final ``k`` sentences begin."""
    if k < 1:
        raise ValueError("k must be at least 1")
    starts = sentence_starts(text)
    if not starts:
        return len(text)
    return starts[max(len(starts) - k, 0)]


def last_k_sentences(text: str, k: int = 3) -> str:
    return text[last_k_offset(text, k):]


def _shift_spans(spans: Sequence[PicoSpan], offset: int, length: int) -> list[PicoSpan]:
    shifted = []
    for s in spans:
        start, end = max(s.start - offset, 0), min(s.end - offset, length)
        if start < end:
            shifted.append(PicoSpan(start, end, s.klass))
    return shifted


def truncate_marked(ids: Sequence[int], allowance: int, ent_open: int, ent_close: int) -> list[int]:
    """Cut ``ids`` to ``allowance`` tokens without orphaning an ``<ent>``.

    When the cut lands inside an entity, the last kept token is replaced by a
    closer; an opener left with nothing after it is dropped instead.
    """
    if len(ids) <= allowance:
        return list(ids)
    kept = list(ids[:allowance])
    if not _open_at_end(kept, ent_open, ent_close):
        return kept
    kept.pop()
    while kept and kept[-1] == ent_open:
        kept.pop()
    if _open_at_end(kept, ent_open, ent_close):
        kept.append(ent_close)
    return kept


def _open_at_end(ids: Sequence[int], ent_open: int, ent_close: int) -> bool:
    depth = 0
    for t in ids:
        if t == ent_open:
            depth += 1
        elif t == ent_close:
            depth -= 1
    return depth > 0


def prepare_document(raw: str, spans: Sequence[PicoSpan], config: PackConfig, rules: CleaningRules) -> str:
    """Clean, select sentences and mark one abstract; returns the text to tokenize."""
    text = clean_abstract(raw, rules)
    doc_spans = list(spans) if config.marking else []
    if config.input_mode is InputMode.LAST3:
        offset = last_k_offset(text, config.k)
        text = text[offset:]
        doc_spans = _shift_spans(doc_spans, offset, len(text))
    if config.marking:
        return insert_entity_markers(text, normalize_spans(doc_spans, len(text)))
    return text


def entity_positions(token_ids: Sequence[int], ent_open: int, ent_close: int) -> list[int]:
    positions = []
    inside = False
    for i, t in enumerate(token_ids):
        if t == ent_open:
            inside = True
            positions.append(i)
        elif t == ent_close:
            inside = False
            positions.append(i)
        elif inside:
            positions.append(i)
    return positions


def pack_input(
    review: Review,
    spans: Mapping[int, Sequence[PicoSpan]] | Sequence[Sequence[PicoSpan]] | None,
    config: PackConfig,
    tokenizer,
    rules: CleaningRules | None = None,
) -> PackedInput:
    """Pack a review into ``[<s>] doc_1 <doc-sep> ... doc_n <doc-sep>``.

    ``spans`` gives per-document span lists (by doc index) with offsets into
    the cleaned abstract; it is ignored when marking is off. Documents that
    are empty after truncation contribute no segment.
    """
    if not review.abstracts:
        raise DataError(f"review {review.review_id} has no abstracts")
    rules = rules or CleaningRules.default()
    if spans is None:
        spans = {}
    elif not isinstance(spans, Mapping):
        spans = dict(enumerate(spans))

    encoded = []
    for i, raw in enumerate(review.abstracts):
        text = prepare_document(raw, spans.get(i, ()), config, rules)
        encoded.append(tokenizer.tokenize(text))
    allowances = distribute_budget([len(e) for e in encoded], config.budget, overhead=1, global_overhead=1)

    ent_open, ent_close = tokenizer.ent_open_id, tokenizer.ent_close_id
    token_ids = [tokenizer.bos_id]
    boundaries = []
    for ids, allowance in zip(encoded, allowances):
        segment = truncate_marked(ids, allowance, ent_open, ent_close)
        if not segment:
            continue
        token_ids.extend(segment)
        boundaries.append(len(token_ids))
        token_ids.append(tokenizer.doc_sep_id)

    return PackedInput(
        review_id=review.review_id,
        token_ids=token_ids,
        doc_boundaries=boundaries,
        entity_token_positions=entity_positions(token_ids, ent_open, ent_close),
        marking=config.marking,
        special_ids={
            "pad": tokenizer.pad_id,
            "bos": tokenizer.bos_id,
            "doc_sep": tokenizer.doc_sep_id,
            "ent_open": ent_open,
            "ent_close": ent_close,
        },
    )


def check_packed(packed: PackedInput, budget: int) -> list[str]:
    """Invariant violations of a packed input (empty list when sound)."""
    problems = []
    ids = packed.token_ids
    sp = packed.special_ids
    if len(ids) > budget:
        problems.append(f"length {len(ids)} exceeds budget {budget}")
    seps = [i for i, t in enumerate(ids) if t == sp["doc_sep"]]
    if seps != packed.doc_boundaries:
        problems.append("doc_boundaries do not match <doc-sep> positions")
    if ids and ids[-1] != sp["doc_sep"] and seps:
        problems.append("sequence does not end with <doc-sep>")
    for a, b in zip([0] + seps, seps):
        if b - a <= 1:
            problems.append(f"empty document segment before position {b}")
    depth = 0
    for i, t in enumerate(ids):
        if t == sp["ent_open"]:
            depth += 1
            if depth > 1:
                problems.append(f"nested <ent> at {i}")
        elif t == sp["ent_close"]:
            depth -= 1
            if depth < 0:
                problems.append(f"orphan </ent> at {i}")
                depth = 0
        elif t == sp["doc_sep"] and depth:
            problems.append(f"<doc-sep> inside entity at {i}")
    if depth:
        problems.append("unclosed <ent> at end of sequence")
    if packed.entity_token_positions != entity_positions(ids, sp["ent_open"], sp["ent_close"]):
        problems.append("entity_token_positions inconsistent with token_ids")
    if not packed.marking and packed.entity_token_positions:
        problems.append("entity tokens present with marking off")
    return problems
