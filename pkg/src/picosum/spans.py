"""PICO spans and the ``<ent>``/``</ent>`` entity-marker format.

All three classes share one marker pair; the class label survives only on
:class:`PicoSpan` for statistics. Markers are written with one space on the
inner side (``<ent> span </ent>``) so that any tokenizer sees them as
standalone tokens.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from picosum.corpus import DataError, read_jsonl
from picosum.tokenizer import ENT_CLOSE, ENT_OPEN

PICO_CLASSES = ("P", "I", "O")

_MARKER_RE = re.compile(r"<ent> ?| ?</ent>")


class SpanError(ValueError):
    """Invalid span or malformed marked text."""


@dataclass(frozen=True, order=True)
class PicoSpan:
    start: int
    end: int
    klass: str = "I"

    def __post_init__(self):
        if self.klass not in PICO_CLASSES:
            raise SpanError(f"unknown PICO class {self.klass!r}")

    def to_list(self) -> list:
        return [self.start, self.end, self.klass]


def _check(span: PicoSpan, text_length: int | None) -> None:
    if span.start < 0 or span.start >= span.end:
        raise SpanError(f"invalid span offsets ({span.start}, {span.end})")
    if text_length is not None and span.end > text_length:
        raise SpanError(f"span ({span.start}, {span.end}) exceeds text length {text_length}")


def normalize_spans(spans: Iterable[PicoSpan], text_length: int | None = None) -> list[PicoSpan]:
    """Sort spans and merge any that overlap or touch.

    A merged span keeps the class of its earliest constituent (ties on start
    broken by the longer span, then class order).
    """
    items = list(spans)
    for s in items:
        _check(s, text_length)
    items.sort(key=lambda s: (s.start, -s.end, PICO_CLASSES.index(s.klass)))
    merged: list[PicoSpan] = []
    for s in items:
        if merged and s.start <= merged[-1].end:
            last = merged[-1]
            if s.end > last.end:
                merged[-1] = PicoSpan(last.start, s.end, last.klass)
        else:
            merged.append(s)
    return merged


def is_normalized(spans: Sequence[PicoSpan]) -> bool:
    return all(a.end < b.start for a, b in zip(spans, spans[1:]))


def insert_entity_markers(text: str, spans: Sequence[PicoSpan]) -> str:
    ordered = sorted(spans)
    for s in ordered:
        _check(s, len(text))
    if not is_normalized(ordered):
        raise SpanError("spans overlap or touch; normalize them before marking")
    parts = []
    pos = 0
    for s in ordered:
        parts.append(text[pos:s.start])
        parts.append(f"{ENT_OPEN} {text[s.start:s.end]} {ENT_CLOSE}")
        pos = s.end
    parts.append(text[pos:])
    return "".join(parts)


def strip_entity_markers(marked: str, klass: str = "I") -> tuple[str, list[PicoSpan]]:
    """Remove markers, returning plain text and the spans they delimited.

    Marker classes are not recoverable, so every span gets ``klass``.
    """
    out = []
    spans = []
    pos = 0
    length = 0
    open_at: int | None = None
    for m in _MARKER_RE.finditer(marked):
        chunk = marked[pos:m.start()]
        out.append(chunk)
        length += len(chunk)
        is_open = "/" not in m.group()
        if is_open:
            if open_at is not None:
                raise SpanError(f"nested {ENT_OPEN} at offset {m.start()}")
            open_at = length
        else:
            closer = m.start() + m.group().index("<")
            if open_at is None:
                raise SpanError(f"unmatched {ENT_CLOSE} at offset {closer}")
            if length == open_at:
                raise SpanError(f"empty entity span closed at offset {closer}")
            spans.append(PicoSpan(open_at, length, klass))
            open_at = None
        pos = m.end()
    if open_at is not None:
        last_open = marked.rfind(ENT_OPEN)
        raise SpanError(f"unclosed {ENT_OPEN} at offset {last_open}")
    out.append(marked[pos:])
    return "".join(out), spans


def lexicon_tag(text: str, lexicon: Mapping[str, str]) -> list[PicoSpan]:
    """Case-insensitive, longest-match, left-to-right phrase tagger.

    Matches must start and end on word boundaries. Stand-in for a trained
    PICO tagger in tests and demos.
    """
    if not lexicon:
        return []
    by_phrase = {}
    for phrase, klass in lexicon.items():
        if not phrase:
            raise SpanError("lexicon phrases must be nonempty")
        by_phrase[phrase.lower()] = klass
    alternation = "|".join(re.escape(p) for p in sorted(by_phrase, key=lambda p: (-len(p), p)))
    pattern = re.compile(rf"(?<!\w)(?:{alternation})(?!\w)", re.IGNORECASE)
    spans = [PicoSpan(m.start(), m.end(), by_phrase[m.group().lower()]) for m in pattern.finditer(text)]
    return normalize_spans(spans, len(text))


def load_lexicon(path: str | Path) -> dict[str, str]:
    """Read a two-column ``phrase<TAB>class`` file; ``#`` starts a comment."""
    lexicon = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        phrase, sep, klass = line.rpartition("\t")
        if not sep:
            raise DataError(f"{path}:{lineno}: expected 'phrase<TAB>class'")
        klass = klass.strip().upper()
        if klass not in PICO_CLASSES:
            raise DataError(f"{path}:{lineno}: unknown class {klass!r}")
        lexicon[phrase.strip()] = klass
    return lexicon


SpanIndex = dict[str, dict[int, list[PicoSpan]]]


def load_span_annotations(path: str | Path) -> SpanIndex:
    """Read span JSONL into ``{review_id: {doc_index: [PicoSpan, ...]}}``."""
    index: SpanIndex = defaultdict(dict)
    for lineno, obj in read_jsonl(path):
        try:
            spans = [PicoSpan(int(s), int(e), str(k)) for s, e, k in obj["spans"]]
            index[str(obj["review_id"])][int(obj["doc_index"])] = spans
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: bad span record ({exc})") from None
    return dict(index)


def write_span_annotations(index: Mapping[str, Mapping[int, Sequence[PicoSpan]]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for review_id in sorted(index):
            for doc_index in sorted(index[review_id]):
                spans = [s.to_list() for s in index[review_id][doc_index]]
                fh.write(json.dumps({"review_id": review_id, "doc_index": doc_index, "spans": spans}) + "\n")
